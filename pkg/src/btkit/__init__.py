"""Behavior tree engine with analysis, planning and conversion tools."""
