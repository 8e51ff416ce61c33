"""Book-discussion companion engine.

Pipeline: raw book text -> tagged sentences -> metaphor-bearing sentence
detection -> content-word pair scoring -> question bank -> budgeted chat
sessions -> post-session survey statistics.
"""

__version__ = "0.1.0"
