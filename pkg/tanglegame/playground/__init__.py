"""Desk-scale experiments over the simulator."""
