"""Radial-basis / multilayer-perceptron regression pipeline for seismic catalogs."""
__version__ = "0.1.0"
