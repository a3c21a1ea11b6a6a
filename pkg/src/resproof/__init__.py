"""Residue representations and creative telescoping for combinatorial sums."""
