"""
Execution timing for long-running library calls
"""

import functools
import logging
import time

logger = logging.getLogger(__name__)

performance_metrics = {'function_timings': {}}


def time_function(func_name):
    """Decorator to time function execution and store in performance metrics"""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.time()
            result = func(*args, **kwargs)
            execution_time = time.time() - start_time

            performance_metrics['function_timings'].setdefault(func_name, []).append(execution_time)

            # Log if execution time is longer than 1 second
            if execution_time > 1.0:
                logger.info(f"{func_name} executed in {execution_time:.4f} seconds")

            return result
        return wrapper
    return decorator


def reset_metrics():
    performance_metrics['function_timings'].clear()
