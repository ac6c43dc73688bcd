"""Paired input/response samples with column roles."""
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, InvalidInputError

INPUT_ROLES = ("input", "control", "time")


@dataclass
class Dataset:
    """Rows are samples.  ``input_roles`` marks each input column as a plain
    input, the control signal, or the sample time."""
    inputs: np.ndarray
    responses: np.ndarray
    input_names: list = None
    response_names: list = None
    input_roles: list = None

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.responses = np.asarray(self.responses, dtype=float)
        if self.responses.ndim == 1:
            self.responses = self.responses[:, None]
        n, d = self.inputs.shape
        if self.responses.shape[0] != n:
            raise ContractViolation(
                f"{n} input rows but {self.responses.shape[0]} response rows")
        q = self.responses.shape[1]
        if q < 1:
            raise InvalidInputError("a dataset needs at least one response column")
        if self.input_names is None:
            self.input_names = [f"x{j}" for j in range(d)]
        if self.response_names is None:
            self.response_names = [f"y{j}" for j in range(q)]
        if self.input_roles is None:
            self.input_roles = ["input"] * d
        self.input_names = list(self.input_names)
        self.response_names = list(self.response_names)
        self.input_roles = list(self.input_roles)
        if len(self.input_names) != d or len(self.input_roles) != d:
            raise ContractViolation("input names/roles do not match the input width")
        if len(self.response_names) != q:
            raise ContractViolation("response names do not match the response width")
        for role in self.input_roles:
            if role not in INPUT_ROLES:
                raise ContractViolation(f"unknown input role {role!r}")
        for role in ("control", "time"):
            if self.input_roles.count(role) > 1:
                raise ContractViolation(f"at most one {role} column is allowed")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def input_dim(self):
        return self.inputs.shape[1]

    @property
    def response_dim(self):
        return self.responses.shape[1]

    @property
    def control_column_index(self):
        return self.input_roles.index("control") if "control" in self.input_roles else None

    @property
    def time_column_index(self):
        return self.input_roles.index("time") if "time" in self.input_roles else None

    @property
    def control(self):
        j = self.control_column_index
        return None if j is None else self.inputs[:, j]

    @property
    def sample_times(self):
        j = self.time_column_index
        return None if j is None else self.inputs[:, j]

    def take(self, rows):
        return Dataset(self.inputs[rows], self.responses[rows], self.input_names,
                       self.response_names, self.input_roles)
