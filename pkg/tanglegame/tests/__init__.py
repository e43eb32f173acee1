"""
Tests of the tanglegame package.
"""
