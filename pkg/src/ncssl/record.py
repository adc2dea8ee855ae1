"""Time-stamped monitor series shared by simulators, the trainer and the CLI."""
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TrajectoryRecord:
    """Named monitor series on a common time axis.

    Columns are fixed by the first appended row; later rows must carry the
    same names.
    """

    time_name: str = "t"
    times: list = field(default_factory=list)
    monitors: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def append(self, t, values):
        if not self.monitors and not self.times:
            self.monitors = {k: [] for k in values}
        elif set(values) != set(self.monitors):
            missing = set(self.monitors) ^ set(values)
            raise KeyError(f"monitor names changed mid-run: {sorted(missing)}")
        self.times.append(float(t))
        for k in self.monitors:
            self.monitors[k].append(float(values[k]))

    def __len__(self):
        return len(self.times)

    def __getitem__(self, name):
        if name == self.time_name:
            return np.asarray(self.times)
        return np.asarray(self.monitors[name])

    def __contains__(self, name):
        return name == self.time_name or name in self.monitors

    @property
    def columns(self):
        return [self.time_name, *self.monitors]

    def rows(self):
        cols = [self.times, *self.monitors.values()]
        return [list(r) for r in zip(*cols)]

    def last(self, name):
        return self[name][-1]
