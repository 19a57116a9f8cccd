"""Core functionality for evsync."""
