"""
Prompt template registry for SAGE
File: config/prompts.py

Templates use string.Template placeholders (${slot}) so the braces of .abm
programs and JSON never need escaping. Every template declares its slot set
and carries one worked example; the response conventions (fenced blocks) are
stated in the template text itself.
"""

DSL_REFERENCE = """\
The model language (.abm) in brief:
  model <name>
  param <name> = <number>
  grid <width> by <height>
  object <name> {
    state <name>: bool|int|real|position = <expr>
    activity <name> { <statements> }
  }
  init <object> count <expr>
  schedule do|random_do|conditional_do|random_conditional_do <object>.<activity> [when <expr>]
  record <metric> = <expr>
Statements: <state> := <expr> | neighbor.<state> := <expr> | emit <event>
  | if <expr> { ... } else { ... } | for neighbor within <expr> { ... } | todo
Expressions: numbers, true/false, states, parameters, id, neighbor.<state>,
  + - * /, < <= == != >= >, and or not, bernoulli(p), uniform(a, b),
  randint(a, b), count_neighbors(radius, pred), count_all(object, pred),
  sum_all(object, expr), distance(self, neighbor), event_count(event),
  cell(x, y), random_cell(), nearby_cell(radius)."""

PREDICATE_REFERENCE = """\
The verification language:
  pred := agg <op> number | unchanged(metric[, tolerance])
        | pred and pred | pred or pred | not pred | (pred)
  agg  := final(metric) | max(metric) | min(metric) | mean(metric)
        | last_k_mean(metric, k)
  op   := < | <= | == | != | >= | >"""

_GEN_ABM_EXAMPLE = """\
Example scenario:
{"objects": [{"name": "tree", "states": [{"name": "burning", "description": "whether the tree is on fire", "type": "bool"}],
  "activities": [{"name": "ignite", "description": "catch fire from a burning neighbor"}]}],
 "scheduling": [{"kind": "Do", "object": "tree", "activity": "ignite"}], "parameters": {"trees": 20}}
Example answer:
```abm
model forest
param trees = 20
object tree {
  state burning: bool = id == 0
  state spot: position = random_cell()
  activity ignite {
    if count_neighbors(1, neighbor.burning) > 0 {
      burning := true
    }
  }
}
init tree count trees
schedule do tree.ignite
record burning_share = count_all(tree, neighbor.burning) / trees
```"""

_RECTIFY_EXAMPLE = """\
Example program:
1 | model demo
2 | object cell {
3 |   state alive: bool = true
4 |   activity die { aliv := false }
5 |   activity grow { todo }
6 | }
Example defects:
[4, "aliv", "unknown state of object cell"]
- cell.grow: activity body is a todo placeholder
  description: a living cell stays alive
Example answer:
```abm
model demo
object cell {
  state alive: bool = true
  activity die { alive := false }
  activity grow { alive := alive }
}
```"""

_VERIFICATION_EXAMPLE = """\
Example criterion: variable_name=infected_share, variable_example=0.3,
requirement="The infected share ends below a fifth"
Example answer:
```predicate
final(infected_share) < 0.2
```
Example criterion: variable_name=herd_size, variable_example=12,
requirement="The herd size should not change"
Example answer:
```predicate
unchanged(herd_size)
```"""

_COT_EXAMPLE = """\
Example answer:
```relations
[["sheep", "graze"], ["sheep", "hunger"], ["param", "grass_rate"]]
```
```reasons
Hunger rises because grazing happens only on every other step.
```
```solutions
[{"title": "graze every step", "directives": [
  {"op": "add_schedule", "kind": "do", "object": "sheep", "activity": "graze"}]}]
```"""

_MODIFY_EXAMPLE = """\
Example answer:
```patch
[{"op": "add_state", "object": "sheep", "name": "resting", "type": "bool", "default": "false"},
 {"op": "replace_activity", "object": "sheep", "name": "graze", "body": "if not resting { hunger := 0 }"},
 {"op": "set_parameter", "name": "grass_rate", "value": 2}]
```
```abm
(the complete patched program)
```"""

PROMPT_TEMPLATES = {
    "gen_abm": {
        "slots": ("scenario",),
        "template": """\
You write agent-based models in the .abm language from a conceptual representation.
Every object, state and activity of the representation must appear in the program with
a concrete body (never `todo`), and every scheduling entry becomes a schedule line.

${dsl_reference}

${example}

Conceptual representation:
${scenario}

Answer with exactly one fenced block tagged abm.
""",
        "example": _GEN_ABM_EXAMPLE,
    },
    "rectify_defects": {
        "slots": ("program", "compilation_errors", "lacking_details"),
        "template": """\
The .abm program below has defects found by the verifier. Compilation errors are listed as
[error_line, error_code, error_reasons]. Lacking details name activities whose bodies are
placeholders, empty, missing or without effect, together with their intended behaviour.
Fix every defect and keep everything else unchanged.

${dsl_reference}

${example}

Program:
${program}

Compilation errors:
${compilation_errors}

Lacking details:
${lacking_details}

Answer with the complete corrected program in exactly one fenced block tagged abm.
""",
        "example": _RECTIFY_EXAMPLE,
    },
    "gen_verification": {
        "slots": ("problem", "variable_name", "variable_example", "requirement", "metrics", "feedback"),
        "template": """\
Translate one judgment criterion into a predicate over recorded simulation metrics.

${predicate_reference}

${example}

Problem: ${problem}
Recorded metrics: ${metrics}
Criterion: variable_name=${variable_name}, variable_example=${variable_example},
requirement="${requirement}"
${feedback}
Answer with exactly one fenced block tagged predicate.
""",
        "example": _VERIFICATION_EXAMPLE,
    },
    "cot": {
        "slots": ("objective", "program", "simulation_summary", "slices", "verdict"),
        "template": """\
The simulation of the model below does not yet meet the objective. Think in three steps:
1. Extract relations: list the operations, states and parameters that influence the evaluated variables.
2. Analyze causes: explain why the current results miss the criteria.
3. Propose solutions: give concrete modifications of the model, as directives.

Directive ops: add_state, remove_state, add_activity, replace_activity, remove_activity,
add_schedule, remove_schedule, set_parameter.

${example}

Objective:
${objective}

Dependencies of each evaluated variable (backward slices):
${slices}

Simulation results:
${simulation_summary}

Current verdict:
${verdict}

Program:
${program}

Answer with three fenced blocks tagged relations (JSON list), reasons (text) and
solutions (JSON list of {"title", "directives"}).
""",
        "example": _COT_EXAMPLE,
    },
    "modify": {
        "slots": ("program", "solutions"),
        "template": """\
Apply the proposed solutions to the .abm program.

${dsl_reference}

${example}

Program:
${program}

Solutions:
${solutions}

Answer with one fenced block tagged patch holding the JSON list of directives, and
optionally one fenced block tagged abm with the complete patched program.
""",
        "example": _MODIFY_EXAMPLE,
    },
}

# block tags each kind's response must carry
RESPONSE_BLOCKS = {
    "gen_abm": ("abm",),
    "rectify_defects": ("abm",),
    "gen_verification": ("predicate",),
    "cot": ("relations", "reasons", "solutions"),
    "modify": ("patch",),
}

# shared references substituted in every template
SHARED_SLOTS = {
    "dsl_reference": DSL_REFERENCE,
    "predicate_reference": PREDICATE_REFERENCE,
}
