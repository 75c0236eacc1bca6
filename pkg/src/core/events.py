"""
In-memory storage for study events and reports.
"""

import threading
from typing import List, Dict, Optional
from src.core.models import StudyEvent, ErrorReport

# In-memory storage for events and reports
study_events: Dict[str, StudyEvent] = {}
study_reports: Dict[str, ErrorReport] = {}

# Studies run in the API threadpool, so writes and listings may overlap
_lock = threading.Lock()


def record_event(event: StudyEvent, report: ErrorReport):
    """Record a study event and its report."""
    with _lock:
        study_events[event.study_id] = event
        study_reports[event.study_id] = report


def list_events(
    limit: int = 20,
    offset: int = 0,
    case_id: Optional[str] = None,
    degree: Optional[int] = None,
) -> List[StudyEvent]:
    """List study events with optional filtering."""
    with _lock:
        filtered_events = list(study_events.values())

    if case_id:
        filtered_events = [event for event in filtered_events if event.case_id == case_id]
    if degree:
        filtered_events = [event for event in filtered_events if event.degree == degree]

    return filtered_events[offset : offset + limit]


def get_event(study_id: str) -> Optional[StudyEvent]:
    """Get a study event by its study ID."""
    with _lock:
        return study_events.get(study_id)


def get_report(study_id: str) -> Optional[ErrorReport]:
    """Get a stored report by its study ID."""
    with _lock:
        return study_reports.get(study_id)


def clear():
    with _lock:
        study_events.clear()
        study_reports.clear()
