"""Version information for roughmild"""

__version__ = "0.4.0"
__app_name__ = "roughmild"
__author__ = "roughmild developers"
__email__ = ""

CSV_SCHEMA = "v1"
