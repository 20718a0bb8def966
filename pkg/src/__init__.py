"""
Supratransmission Package
Energy-consistent simulation of damped, boundary-driven nonlinear chains
"""
