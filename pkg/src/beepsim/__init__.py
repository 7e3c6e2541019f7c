"""Slot-synchronous simulation of anonymous beeping networks."""
