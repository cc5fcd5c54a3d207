# Copyright (c) 2020 The tripletqmc authors
# All rights reserved.
#
#   Redistribution and use in source and binary forms, with or
#   without modification, are permitted provided that the following
#   conditions are met:
#
#    1. Redistributions of source code must retain the above copyright
#       notice, this list of conditions and the following disclaimer.
#    2. Redistributions in binary form must reproduce the above
#       copyright notice, this list of conditions and the following
#       disclaimer in the documentation and/or other materials provided
#       with the distribution.
#
# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS
# "AS IS" AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT
# LIMITED TO, THE IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS
# FOR A PARTICULAR PURPOSE ARE DISCLAIMED. IN NO EVENT SHALL THE
# COPYRIGHT HOLDER OR CONTRIBUTORS BE LIABLE FOR ANY DIRECT, INDIRECT,
# INCIDENTAL, SPECIAL, EXEMPLARY, OR CONSEQUENTIAL DAMAGES (INCLUDING,
# BUT NOT LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR SERVICES;
# LOSS OF USE, DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER
# CAUSED AND ON ANY THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT
# LIABILITY, OR TORT (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN
# ANY WAY OUT OF THE USE OF THIS SOFTWARE, EVEN IF ADVISED OF THE
# POSSIBILITY OF SUCH DAMAGE.

"""Exceptions raised by tripletqmc.

All failures surface as :class:`SimulationError` carrying one of the codes of
:class:`SimulationError.ERR`. Two subclasses attach structured context.
"""

from enum import IntEnum, unique


class SimulationError(Exception):
    @unique
    class ERR(IntEnum):
        INVALID_INPUT = 0x01
        INVALID_CONFIG = 0x02
        CONTRACT_VIOLATION = 0x03
        RESOURCE_LIMIT = 0x04
        FIT_FAILURE = 0x05
        UNDEFINED_LIMIT = 0x06
        ACCURACY = 0x07

        def __str__(self):
            return '0x%02X - %s' % (self.value, self.name)

        def __call__(self, cause=None):
            return SimulationError(self, cause)

    def __init__(self, code, cause=None):
        self.code = SimulationError.ERR(code)
        self.cause = cause
        message = 'Simulation error: {}'.format(self.code)
        if cause:
            message += '. Caused by {}'.format(cause)
        super(SimulationError, self).__init__(message)

    def __reduce__(self):
        return (type(self), (self.code, self.cause))


class ConfigError(SimulationError):
    """A configuration value is missing, unknown or out of range.

    :param field: Dotted path of the offending key, e.g. ``schedule.r``.
    :param cause: Human readable description.
    :param unknown: Optional sorted list of unrecognized keys.
    """

    def __init__(self, field, cause, unknown=None):
        self.field = field
        self.detail = cause
        self.unknown = sorted(unknown) if unknown else []
        super(ConfigError, self).__init__(
            SimulationError.ERR.INVALID_CONFIG, '{}: {}'.format(field, cause))

    def __reduce__(self):
        return (ConfigError, (self.field, self.detail, self.unknown))


class PopulationLimitError(SimulationError):
    """The walker population exceeded the configured hard cap."""

    def __init__(self, loop, population, cap, run=None):
        self.loop = loop
        self.population = population
        self.cap = cap
        self.run = run
        super(PopulationLimitError, self).__init__(
            SimulationError.ERR.RESOURCE_LIMIT, self._describe())

    def _describe(self):
        where = 'loop {}'.format(self.loop)
        if self.run is not None:
            where = 'run {}, {}'.format(self.run, where)
        return '{}: population {} exceeds cap {}'.format(
            where, self.population, self.cap)

    def in_run(self, run):
        """Returns a copy of this error tagged with the replica index."""
        return PopulationLimitError(self.loop, self.population, self.cap, run)

    def __reduce__(self):
        return (PopulationLimitError,
                (self.loop, self.population, self.cap, self.run))
