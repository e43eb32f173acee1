"""Discrete-event simulation of the tangle."""
