# Utils package initialization file

from utils.helpers import version_string, write_csv, write_json
from utils.performance import time_function

__all__ = ['version_string', 'write_csv', 'write_json', 'time_function']
