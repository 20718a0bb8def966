"""Configuration module for chain defaults and numerical tolerances"""
