"""Multiparty immune algorithm for multiparty multiobjective optimization."""
