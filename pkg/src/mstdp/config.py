#!/usr/bin/env python
#
# mstdp
# Copyright (C) 2022 the mstdp developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>

# System imports
import dataclasses
import logging
from dataclasses import dataclass, field

# Local imports
from .network import ACTIVATIONS
from .plasticity import LearnConfig

ORDERS = ("random", "cyclic")
READOUTS = ("state", "rho")


@dataclass
class ExperimentConfig:
    """
    Everything needed to reproduce a training run.  Defaults are the
    reference MNIST experiment.
    """
    n_hidden: int = 2048
    train_count: int = 10000
    test_count: int = 500
    presentations: int = 500000
    learn: LearnConfig = field(default_factory=LearnConfig)
    init_range: float = 0.1
    seed: int = 0
    activation: str = "sigmoid4"
    test_phases: int = 3
    generate_phases: int = 3
    order: str = "random"
    readout: str = "state"
    checkpoint_interval: int = 0
    metrics_interval: int = 1000
    deterministic: bool = False

    def validate(self):
        for name in ("train_count", "test_count", "test_phases", "generate_phases"):
            if getattr(self, name) < 1:
                raise ValueError("%s must be at least 1, got %s" % (name, getattr(self, name)))
        if self.n_hidden < 0:
            raise ValueError("n_hidden must be non-negative, got %s" % self.n_hidden)
        if self.presentations < 0:
            raise ValueError("presentations must be non-negative, got %s" % self.presentations)
        if not self.init_range > 0:
            raise ValueError("init_range must be positive, got %s" % self.init_range)
        if self.checkpoint_interval < 0 or self.metrics_interval < 0:
            raise ValueError("intervals must be non-negative")
        if self.activation not in ACTIVATIONS:
            raise ValueError("unknown activation %s" % self.activation)
        if self.order not in ORDERS:
            raise ValueError("unknown presentation order %s" % self.order)
        if self.readout not in READOUTS:
            raise ValueError("unknown readout %s" % self.readout)
        self.learn.validate()
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        values = {}
        for key, value in d.items():
            if key in known:
                values[key] = value
            else:
                logging.debug("ignoring config echo key %s", key)
        if isinstance(values.get("learn"), dict):
            values["learn"] = LearnConfig.from_dict(values["learn"])
        return cls(**values)
