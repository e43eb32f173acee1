"""Hand-built tangles for the tests."""
