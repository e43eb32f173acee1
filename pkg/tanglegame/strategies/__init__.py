"""Attachment strategies."""
