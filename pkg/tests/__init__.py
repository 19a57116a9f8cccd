"""Test package for evsync."""
