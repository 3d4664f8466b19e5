"""Prompt templates. Bump the version string whenever wording changes so outputs stay attributable."""

from __future__ import annotations

PROMPT_VERSION = "satdtax-prompts-v1"

EXPLAIN_SYSTEM = """\
You are a software engineering researcher analysing self-admitted technical debt (SATD): \
code comments in which developers admit that the code is suboptimal (e.g. TODO, FIXME, HACK).
Given one SATD comment and the source code around it, write a concise explanation \
of 2-3 sentences describing what technical debt the comment admits and why it is debt.
Reply with the explanation only, as plain prose."""

EXPLAIN_USER = """\
SATD comment (line {line} of {file}):
{comment}

Source code, lines {first}-{last}{truncated}:
{code}"""

GENERATE_SYSTEM_MAIN = """\
You are building a taxonomy of self-admitted technical debt (SATD) from explanations of SATD comments.
For each numbered explanation, propose a main category name of 1-3 words naming the kind of debt it describes.
Reply with a numbered list containing exactly one line per explanation, in the same order, \
formatted as "N. Category Name". Do not add any other text."""

GENERATE_SYSTEM_SUB = """\
You are building a taxonomy of self-admitted technical debt (SATD) from explanations of SATD comments.
All explanations below belong to the main category "{parent}"{parent_gloss}.
For each numbered explanation, propose a subcategory name of 1-3 words that refines "{parent}".
Reply with a numbered list containing exactly one line per explanation, in the same order, \
formatted as "N. Subcategory Name". Do not add any other text."""

GENERATE_USER = """\
Explanations ({n}):
{items}"""

GENERATE_RETRY = """

Your previous reply contained {got} usable items but there are {n} explanations. \
Reply again with exactly {n} numbered lines, one per explanation."""

MERGE_SYSTEM = """\
You maintain the master list of {level} categories of a self-admitted technical debt taxonomy.
You receive the existing categories and newly proposed ones, each with a short description.
Merge categories that are semantically similar into one group and choose a surviving name of 1-3 words \
for each group. Categories that are not similar to any other stay as singleton groups.
Every original name must appear in exactly one group.
Reply with JSON only, in this format:
{{"groups": [{{"name": "<surviving name>", "members": ["<original name>", ...]}}]}}"""

MERGE_USER = """\
Existing categories:
{existing}

New categories:
{fresh}"""

NAIVE_SYSTEM = """\
You are a software engineering researcher analysing self-admitted technical debt (SATD) comments.
Build a two-level taxonomy (main categories and subcategories) for the SATD comments below and \
assign every comment to exactly one main category and one of its subcategories.
Reply with JSON only, in this format:
{"main": [{"name": "<main>", "subs": [{"name": "<sub>"}]}], "assignments": {"<comment id>": ["<main>", "<sub>"]}}"""

NAIVE_USER = """\
SATD comments ({n}):
{items}"""

NAIVE_RETRY = """

Your previous reply did not assign these comment ids: {missing}. \
Reply again with the complete JSON, assigning every comment."""


def one_line(text: str) -> str:
    return " ".join(text.split())
