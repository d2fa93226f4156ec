#  Copyright (C) 2025 The pctmi Developers
#
#  This program is free software: you can redistribute it and/or modify
#  it under the terms of the GNU General Public License as published by
#  the Free Software Foundation, either version 3 of the License, or
#  (at your option) any later version.
#
#  This program is distributed in the hope that it will be useful,
#  but WITHOUT ANY WARRANTY; without even the implied warranty of
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#  GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License
#  along with this program.  If not, see <http://www.gnu.org/licenses/>.

from __future__ import annotations


class PctmiError(ValueError):
    """
    Base class of all errors raised by the library.
    It derives from `ValueError` so that callers catching `ValueError` keep working.
    """


class InvalidWindowError(PctmiError):
    pass


class AlignmentError(PctmiError):
    pass


class InsufficientSamplesError(PctmiError):
    def __init__(self, n_eff: int, minimum: int, what: str = "joint rows"):
        super().__init__(f"Only {n_eff} {what}, at least {minimum} required.")
        self.n_eff: int = n_eff
        self.minimum: int = minimum


class InvalidDataError(PctmiError):
    pass


class InvalidConfigError(PctmiError):
    pass


class NoCompatibleConfigError(PctmiError):
    """
    Raised when two series cannot be compared under any window/gap configuration.
    """


class InfeasibleConditioningError(PctmiError):
    pass


class DegenerateSeriesError(PctmiError):
    pass


class NodeSetMismatchError(PctmiError):
    pass


class GraphError(PctmiError):
    pass
