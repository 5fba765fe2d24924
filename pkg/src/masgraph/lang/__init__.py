from .parser import parse_abs, parse_model, parse_queries
from .printer import print_abs, print_model, print_queries
