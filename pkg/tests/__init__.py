"""Tests for the MAIL toolkit."""
