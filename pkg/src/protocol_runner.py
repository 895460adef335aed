"""
Projection Postulate Engine

ProtocolRunner: teleportation and one-way computation under a configurable
projection postulate.
"""

import logging
from typing import Optional

from protocols.one_way import OneWayMixin
from protocols.refinement_choice import ProtocolConfig, RefinementChoiceMixin
from protocols.teleportation import TeleportationMixin
from tolerances import DEFAULT_TOLERANCES, Tolerances


class ProtocolRunner(RefinementChoiceMixin, TeleportationMixin, OneWayMixin):

    def __init__(self, config: Optional[ProtocolConfig] = None, tol: Tolerances = DEFAULT_TOLERANCES,
                 logger: Optional[logging.Logger] = None):
        self.logger = logger or logging.getLogger(__name__)
        self.config = config or ProtocolConfig()
        self.tol = tol
        self._alice_observable = None
        self.logger.info(f"Protocol runner using {self.config.label} (seed {self.config.seed})")
