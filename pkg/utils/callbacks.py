# VSDesign 🚀, GPL-3.0 license
"""
Callback utils
"""


class Callbacks:
    """"
    Handles all registered callbacks for harness and CLI hooks
    """

    def __init__(self):
        # Define the available callbacks
        self._callbacks = {
            'on_run_start': [],
            'on_check_start': [],
            'on_block_end': [],  # one block of Monte Carlo trials
            'on_check_end': [],
            'on_report_end': [],
        }

    def register_action(self, hook, name='', callback=None):
        """
        Register a new action to a callback hook

        Args:
            hook        The callback hook name to register the action to
            name        The name of the action for later reference
            callback    The callback to fire
        """
        assert hook in self._callbacks, f"hook '{hook}' not found in callbacks {list(self._callbacks)}"
        assert callable(callback), f"callback '{callback}' is not callable"
        self._callbacks[hook].append({'name': name, 'callback': callback})

    def get_registered_actions(self, hook=None):
        # Registered actions for one hook, or all of them
        return self._callbacks[hook] if hook else self._callbacks

    def run(self, hook, *args, **kwargs):
        # Fire every action registered on hook, in registration order
        assert hook in self._callbacks, f"hook '{hook}' not found in callbacks {list(self._callbacks)}"
        for action in self._callbacks[hook]:
            action['callback'](*args, **kwargs)
