"""Shared domain types, space descriptors and validation."""
