# Tests package
"""Unit tests for the Transaction Simulator."""
