"""Complex-shift regularization and stable evaluation of unbounded operators."""

from .config import apply_thread_cap

apply_thread_cap()

__version__ = "0.1.0"
