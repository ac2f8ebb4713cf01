"""
AssetFlow
Multi-asset, multi-group asset flow dynamics: simulation, stability and calibration
"""

__version__ = "0.3.0"
