"""
Attachment Strategy Base Class.
"""

from tanglegame.walks.walk import WalkParams


class TipSelector():
    """Base class for attachment strategies.

    Attributes
    ----------
    params : WalkParams
        Parameters of the tip-selecting walk the strategy relies on.
    label : str
        Strategy label written to the transaction records.
    selections : int
        Number of tip pairs handed out so far.

    Methods
    ---------
    __init__(self, params)
        Initialize the strategy.
    select(self, view, rng) :
        Return the tip pair to approve.
    __call__(self, view, rng) :
        Same as `select`, counting the selection.

    """
    label = None

    def __init__(self, params):
        """ TipSelector object.

        Parameters
        ----------
        params : WalkParams
            Walk parameters.
        """
        if not isinstance(params, WalkParams):
            raise TypeError('Walk parameters should be instance of tanglegame.walks.walk.WalkParams')
        self.params = params
        self.selections = 0

    def __call__(self, view, rng):
        self.selections += 1
        return self.select(view, rng)

    def select(self, view, rng):
        """Return the TipPair to approve on `view`."""
        raise NotImplementedError("select not implemented.")
