# -*- coding: utf-8 -*-
# Copyright © 2024 The stealthkey developers. All rights reserved.
# This file is part of the stealthkey project. See LICENSE in the root
# directory for licensing information.

import sys

from stealthkey.cli import main


sys.exit(main())
