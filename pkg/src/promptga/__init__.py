"""Interactive evolutionary prompt optimization.

Evolves text-to-image prompts from iterative human votes and exports a
personalized prompting model that keeps generating preferred prompts with
no further input. Image synthesis is delegated to a pluggable backend
(remote txt2img server or deterministic offline mock).
"""

__version__ = "0.1.0"
