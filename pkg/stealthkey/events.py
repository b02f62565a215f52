# -*- coding: utf-8 -*-
# Copyright © 2024 The stealthkey developers. All rights reserved.
# This file is part of the stealthkey project. See LICENSE in the root
# directory for licensing information.

"""Priority-ordered signals for announcing experiment progress.

Long-running sweeps own :py:class:`Signal` instances and call them as work
completes; whoever drives the sweep attaches slots (a logger, a CSV writer)
without the sweep knowing about any of them.

Slots run lowest priority value first, and in insertion order among equal
priorities. A slot may raise :py:class:`SignalStop` to skip the slots after
it.
"""

import logging
from bisect import insort_right
from functools import update_wrapper
from itertools import count
from threading import RLock

from stealthkey import StealthKeyException


log = logging.getLogger(__name__)


PRIORITY_NORMAL = 0


class SignalException(StealthKeyException):
    """The base for all signal exceptions."""


class SignalStop(SignalException):
    """Raised by a slot to stop the remaining slots of a call."""


class Slot:
    """A function attached to a :py:class:`Signal`.

    Create these through :py:meth:`Signal.add`, not directly.
    """

    def __init__(self, priority, uid, function):
        self.priority = priority
        self.uid = uid
        self.function = function

        update_wrapper(self, function)

    def __call__(self, sender, *args, **kwargs):
        return self.function(sender, *args, **kwargs)

    def __repr__(self):
        return "Slot(priority={}, uid={}, function={})".format(
            self.priority, self.uid, self.function)

    def __lt__(self, other):
        return (self.priority, self.uid) < (other.priority, other.uid)


class Signal:
    """An ordered list of slots, called together.

    This class is thread-safe.

    :ivar name:
        A label used in logs.

    :ivar slots:
        The attached slots, in call order.
    """

    def __init__(self, name=None):
        self.name = name if name is not None else "<anonymous>"
        self.slots = []

        self._slots_lock = RLock()
        self._uids = count()

    def add(self, function=None, priority=PRIORITY_NORMAL):
        """Attach ``function``, called as ``function(sender, *args)``.

        Usable as a decorator when ``function`` is omitted.

        :returns:
            The new :py:class:`Slot`.
        """
        if function is None:
            return lambda f: self.add(f, priority)

        with self._slots_lock:
            slot = Slot(priority, next(self._uids), function)
            insort_right(self.slots, slot)

        return slot

    def call(self, sender, *args, **kwargs):
        """Run every slot in order.

        Exceptions raised by slots propagate, except
        :py:class:`SignalStop`, which ends the call quietly.

        :returns:
            The return values of the slots that ran.
        """
        ret = []
        with self._slots_lock:
            for slot in list(self.slots):
                try:
                    ret.append(slot(sender, *args, **kwargs))
                except SignalStop:
                    log.debug("Signal %s stopped by %r", self.name, slot)
                    break

        return ret

    def __len__(self):
        return len(self.slots)

    def __repr__(self):
        return "Signal(name={}, slots={})".format(self.name, self.slots)
