"""Tip-selecting random walks and their exit distributions."""
