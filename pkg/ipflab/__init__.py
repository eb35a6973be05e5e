#
# ipflab
#
# A numerical laboratory for the intersection of past and future of multivariate stationary processes.
#
# Copyright (c) 2025-2026 Thomas Kuhlmann
#
# Licensed under the MIT License. See LICENSE file in the project root for license information.
#

from ipflab.common import VERSION

__version__ = VERSION
