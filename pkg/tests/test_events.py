import unittest
from stealthkey import events

calls = []


def record(sender, value=None):
    calls.append(value)
    return value


def stop(sender, value=None):
    raise events.SignalStop()


class TestSignal(unittest.TestCase):

    def setUp(self):
        self.signal = events.Signal("test")
        calls.clear()

    def test_add_call(self):
        self.signal.add(record)
        self.assertListEqual(self.signal.call(self, 3), [3])
        self.assertListEqual(calls, [3])
        self.assertEqual(len(self.signal), 1)

    def test_decorator(self):
        @self.signal.add(priority=1)
        def second(sender):
            return 2

        self.signal.add(lambda sender: 1, priority=0)
        self.assertListEqual(self.signal.call(self), [1, 2])

    def test_priority_order(self):
        self.signal.add(lambda x: 2, priority=5)
        self.signal.add(lambda x: 0, priority=-1)
        self.signal.add(lambda x: 1)
        self.assertListEqual(self.signal.call(self), [0, 1, 2])

    def test_insertion_order(self):
        for i in range(5):
            self.signal.add(lambda x, i=i: i)

        self.assertListEqual(self.signal.call(self), list(range(5)))

    def test_stop(self):
        self.signal.add(record)
        self.signal.add(stop)
        self.signal.add(record)
        self.assertListEqual(self.signal.call(self, 1), [1])
        self.assertListEqual(calls, [1])
        self.assertListEqual(self.signal.call(self, 2), [2])

    def test_exception_propagates(self):
        def boom(sender):
            raise KeyError("boom")

        self.signal.add(boom)
        with self.assertRaises(KeyError):
            self.signal.call(self)

    def test_slot_wraps(self):
        slot = self.signal.add(record)
        self.assertEqual(slot.__name__, "record")
        self.assertIs(slot.function, record)


if __name__ == '__main__':
    unittest.main()
