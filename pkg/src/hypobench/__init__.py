"""Workbench for generating, refining, and evaluating scientific hypotheses.

Subsystems: literature corpus construction with a publication-date cutoff,
prompt building with few-shot selection, a provider-agnostic LLM gateway,
PubMed search tooling, ReAct / tool-call agent loops, a four-role
Analyst-Engineer-Scientist-Critic session pipeline with optional human gates,
rubric-based LLM judging, native text metrics, and a batch experiment harness
with report rendering. The CLI entry point is hypobench.cli:main; the HTTP
service lives in hypobench.service.
"""

__version__ = "0.1.0"
