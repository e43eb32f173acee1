"""Cost metrics and equilibrium search."""
