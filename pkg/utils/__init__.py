"""
工具模块
"""

from .scenario_loader import Scenario, ControlRef, PipelineStep, load_scenario, parse_scenario
from .report_writer import ReportWriter, jsonable, format_cell

__all__ = ['Scenario', 'ControlRef', 'PipelineStep', 'load_scenario', 'parse_scenario',
           'ReportWriter', 'jsonable', 'format_cell']
