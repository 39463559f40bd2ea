"""Fog-computing cognitive radio network simulator."""
