"""Workloads, schedule exploration, checkers and the command line."""
