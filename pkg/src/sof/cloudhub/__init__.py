"""Cloud hub: escalations, labeling, ACL, training jobs, distribution."""

from .api import HubApiServer
from .hub import (
    DISMISSED,
    DONE,
    FAILED,
    LABELED,
    PENDING,
    QUEUED,
    RUNNING,
    Alert,
    CloudHub,
    EnrollmentRecord,
    TrainingJob,
    default_policy,
)
from .policy import (
    DENY,
    GRANT,
    AccessPolicy,
    DevicePolicy,
    check_access,
)
from .registry import LATEST, ModelRegistry
from .wire import WireClient, WireServer, series_from_dict, series_to_dict

__all__ = [
    "AccessPolicy",
    "Alert",
    "CloudHub",
    "DENY",
    "DISMISSED",
    "DONE",
    "DevicePolicy",
    "EnrollmentRecord",
    "FAILED",
    "GRANT",
    "HubApiServer",
    "LABELED",
    "LATEST",
    "ModelRegistry",
    "PENDING",
    "QUEUED",
    "RUNNING",
    "TrainingJob",
    "WireClient",
    "WireServer",
    "check_access",
    "default_policy",
    "series_from_dict",
    "series_to_dict",
]
