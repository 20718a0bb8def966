"""Experiments and validation built on the chain integrators"""
