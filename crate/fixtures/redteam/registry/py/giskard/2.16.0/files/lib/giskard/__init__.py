__version__ = "2.16.0"
