"""Mode-change protocols for multiprocessor real-time systems, with exact
schedule simulation, idle-instant bounds and validity tests."""

from .model import (Application, Job, JobSet, Mode, Platform, PriorityAssignment, Scheduler,
                    Task, TimeValue)

__all__ = ["Application", "Job", "JobSet", "Mode", "Platform", "PriorityAssignment",
           "Scheduler", "Task", "TimeValue"]
__version__ = "0.1.0"
