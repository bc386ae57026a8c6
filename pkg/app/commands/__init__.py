from .outage import cmd_analyze, cmd_compare, cmd_inflection, cmd_simulate

__all__ = ["cmd_analyze", "cmd_compare", "cmd_inflection", "cmd_simulate"]
