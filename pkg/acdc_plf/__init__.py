"""
Hybrid AC/VSC-MTDC power flow and cumulant probabilistic load flow
"""
from acdc_plf.config import settings

__version__ = settings.app_version
