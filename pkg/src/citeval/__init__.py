"""Evaluation harness for sentence-level source attribution by LLM endpoints.

Measures how well chat-completion endpoints attribute scientific sentences to
their cited papers: prompt protocols, optional retrieval augmentation,
hallucination/abstention metrics, and adversarial corpus perturbation.
"""

__version__ = "0.1.0"
