"""Demographic sampling and persona generation.

A DemographicSpec describes the participant pool (age range, gender
labels, income bins, headcount). ``sample_demographics`` allocates the
headcount across gender x income cells exactly — largest-remainder
rounding, not i.i.d. draws — so a uniform 3x5 spec over 60 personas
yields exactly 4 per cell. ``generate_batch`` expands each cell
assignment into a full persona through the LLM, showing the model one
previously generated persona (rotating, seeded) to keep the pool
diverse.
"""

import json
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import prompts
from .llm import CompletionRequest

PROB_TOLERANCE = 1e-9

# The income brackets used for reporting when a spec does not name its own.
DEFAULT_INCOME_BINS = (
    (0, 30000),
    (30000, 58000),
    (58000, 94000),
    (94000, 153000),
    (153000, None),
)

PERSONA_SYSTEM_PROMPT = (
    "You generate realistic user personas for simulated usability studies. "
    "Follow the requested format exactly."
)

_FIELD_RE = re.compile(
    r"^\s*(?:[-*]\s*)?(name|age|gender|income|intent|background)\s*[:：]\s*(.*)$",
    re.IGNORECASE,
)
_INT_RE = re.compile(r"-?\d+")


class PersonaError(ValueError):
    """Invalid demographic specs or unusable persona replies."""


def income_bin_label(low, high):
    """Bracket label like "$0-$30k", "$58k-$94k", or "$153k-"."""
    def money(amount):
        if amount == 0:
            return "$0"
        if amount % 1000 == 0:
            return f"${amount // 1000}k"
        return f"${amount:,}"

    return f"{money(low)}-{money(high) if high is not None else ''}"


@dataclass(frozen=True)
class Persona:
    """One simulated participant."""

    name: str
    age: int
    gender: str
    income: int
    background: str
    intent: str | None = None

    def validate(self):
        if not self.name.strip():
            raise PersonaError("persona name is empty")
        if not isinstance(self.age, int) or self.age <= 0:
            raise PersonaError(f"bad age {self.age!r}")
        if not self.gender.strip():
            raise PersonaError("persona gender is empty")
        if not isinstance(self.income, int) or self.income < 0:
            raise PersonaError(f"bad income {self.income!r}")
        if not self.background.strip():
            raise PersonaError("persona background is empty")
        return self

    def to_dict(self):
        data = {
            "name": self.name,
            "age": self.age,
            "gender": self.gender,
            "income": self.income,
            "background": self.background,
        }
        if self.intent is not None:
            data["intent"] = self.intent
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(
            name=data["name"],
            age=int(data["age"]),
            gender=data["gender"],
            income=int(data["income"]),
            background=data["background"],
            intent=data.get("intent"),
        ).validate()

    def describe(self):
        """The labeled-line block used in prompts (same shape as the seed)."""
        lines = [
            f"Name: {self.name}",
            f"Age: {self.age}",
            f"Gender: {self.gender}",
            f"Income: ${self.income:,}",
            f"Background: {self.background}",
        ]
        if self.intent:
            lines.append(f"Intent: {self.intent}")
        return "\n".join(lines)


def _normalize_weighted(entries, what):
    """Accept ["a", "b"] (uniform) or [["a", 0.5], ["b", 0.5]] forms."""
    if not entries:
        raise PersonaError(f"{what} must be non-empty")
    if all(isinstance(e, str) for e in entries):
        weight = 1.0 / len(entries)
        return tuple((label, weight) for label in entries)
    pairs = []
    for entry in entries:
        label, prob = entry
        pairs.append((label, float(prob)))
    total = sum(p for _, p in pairs)
    if abs(total - 1.0) > PROB_TOLERANCE:
        raise PersonaError(f"{what} probabilities sum to {total}, expected 1")
    return tuple(pairs)


def _normalize_income_bins(entries):
    if not entries:
        raise PersonaError("income_bins must be non-empty")
    bins = []
    uniform = all(len(e) == 2 for e in entries)
    for entry in entries:
        if uniform:
            low, high = entry
            prob = 1.0 / len(entries)
        else:
            low, high, prob = entry
        low = int(low)
        high = None if high is None else int(high)
        if high is not None and high <= low:
            raise PersonaError(f"income bin [{low}, {high}] is empty")
        bins.append(((low, high), float(prob)))
    if not uniform:
        total = sum(p for _, p in bins)
        if abs(total - 1.0) > PROB_TOLERANCE:
            raise PersonaError(f"income probabilities sum to {total}, expected 1")
    ordered = sorted(bins, key=lambda b: b[0][0])
    for (low_a, high_a), _ in ordered[:-1]:
        if high_a is None:
            raise PersonaError("only the last income bin may be unbounded")
    for ((_, high_a), _), ((low_b, _), _) in zip(ordered, ordered[1:]):
        if high_a is None or high_a > low_b:
            raise PersonaError("income bins overlap")
    return tuple(bins)


@dataclass(frozen=True)
class DemographicSpec:
    """Researcher-specified distribution of participant demographics."""

    count: int
    age_min: int
    age_max: int
    genders: tuple = field(default_factory=tuple)   # ((label, prob), ...)
    income_bins: tuple = field(default_factory=tuple)  # (((low, high), prob), ...)

    def validate(self):
        if self.count < 1:
            raise PersonaError("count must be >= 1")
        if self.age_min < 1 or self.age_max < self.age_min:
            raise PersonaError(
                f"bad age range [{self.age_min}, {self.age_max}]")
        _normalize_weighted([list(g) for g in self.genders], "genders")
        return self

    @classmethod
    def from_dict(cls, data):
        age = data.get("age", {})
        if isinstance(age, (list, tuple)):
            age_min, age_max = age
        else:
            age_min = age.get("min", 18)
            age_max = age.get("max", 75)
        spec = cls(
            count=int(data.get("count", 1)),
            age_min=int(age_min),
            age_max=int(age_max),
            genders=_normalize_weighted(data.get("genders", ["female", "male"]),
                                        "genders"),
            income_bins=_normalize_income_bins(
                data.get("income_bins", [list(b) for b in DEFAULT_INCOME_BINS])),
        )
        return spec.validate()

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def largest_remainder_allocation(weights, total):
    """Integer allocation of ``total`` across ``weights`` (which sum to 1)."""
    quotas = [w * total for w in weights]
    counts = [int(q) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    shortfall = total - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-remainders[i], i))
    for i in order[:shortfall]:
        counts[i] += 1
    return counts


@dataclass(frozen=True)
class CellAssignment:
    """One sampled participant slot: exact age, gender, income bracket."""

    age: int
    gender: str
    income_low: int
    income_high: int | None

    @property
    def income_label(self):
        return income_bin_label(self.income_low, self.income_high)


def sample_demographics(spec, seed):
    """Stratified assignment of spec.count slots across gender x income cells."""
    spec.validate()
    rng = random.Random(seed)
    cells = [
        (gender, low, high, g_prob * i_prob)
        for gender, g_prob in spec.genders
        for (low, high), i_prob in spec.income_bins
    ]
    mandatory = sum(1 for c in cells if c[3] > 0)
    if spec.count < mandatory:
        raise PersonaError(
            f"count {spec.count} cannot cover all {mandatory} demographic cells")
    counts = largest_remainder_allocation([c[3] for c in cells], spec.count)
    assignments = []
    for (gender, low, high, _), n in zip(cells, counts):
        for _ in range(n):
            assignments.append(CellAssignment(
                age=rng.randint(spec.age_min, spec.age_max),
                gender=gender,
                income_low=low,
                income_high=high,
            ))
    rng.shuffle(assignments)
    return assignments


def load_seed_persona():
    """The hand-crafted persona used as the first generation example."""
    text = (resources.files("uxsim") / "data" / "seed_persona.txt") \
        .read_text(encoding="utf-8")
    return parse_persona_reply(text)


def parse_persona_reply(text):
    """Parse labeled Name/Age/Gender/Income/Background lines, leniently."""
    fields = {}
    current = None
    for line in text.splitlines():
        match = _FIELD_RE.match(line)
        if match:
            current = match.group(1).lower()
            fields[current] = match.group(2).strip()
        elif current == "background" and line.strip():
            fields[current] += " " + line.strip()
    missing = [k for k in ("name", "age", "gender", "income", "background")
               if not fields.get(k)]
    if missing:
        raise PersonaError(f"persona reply is missing field(s): {missing}")
    age_match = _INT_RE.search(fields["age"])
    income_match = _INT_RE.search(fields["income"].replace(",", ""))
    if not age_match or not income_match:
        raise PersonaError("persona reply has non-numeric age or income")
    return Persona(
        name=fields["name"],
        age=int(age_match.group()),
        gender=fields["gender"],
        income=int(income_match.group()),
        background=fields["background"],
        intent=fields.get("intent") or None,
    ).validate()


def _income_requirement(low, high):
    if high is None:
        return f"of ${low} and above"
    return f"between ${low} and ${high}"


def build_persona_prompt(assignment, example):
    """The generation request: example block above, constraints below."""
    instruction = prompts.render(
        "persona",
        age=assignment.age,
        gender=assignment.gender,
        income_requirement=_income_requirement(
            assignment.income_low, assignment.income_high),
    )
    return f"Example persona:\n\n{example.describe()}\n\n{instruction}"


def _constraint_violations(persona, assignment):
    problems = []
    if persona.age != assignment.age:
        problems.append(f"age must be {assignment.age}, got {persona.age}")
    if persona.gender.strip().lower() != assignment.gender.strip().lower():
        problems.append(
            f"gender must be {assignment.gender}, got {persona.gender}")
    low, high = assignment.income_low, assignment.income_high
    if persona.income < low or (high is not None and persona.income >= high):
        bracket = f">= ${low}" if high is None else f"in [${low}, ${high})"
        problems.append(f"income must be {bracket}, got ${persona.income}")
    return problems


def generate_persona(assignment, example, gateway):
    """Expand one cell assignment into a Persona; one retry on violations."""
    user_text = build_persona_prompt(assignment, example)
    messages = [("user", user_text)]
    last_problems = None
    for _ in range(2):
        reply = gateway.complete(CompletionRequest(
            system=PERSONA_SYSTEM_PROMPT,
            messages=tuple(messages),
            expect="structured_persona",
        ))
        persona = parse_persona_reply(reply)
        problems = _constraint_violations(persona, assignment)
        if not problems:
            return persona
        last_problems = problems
        messages += [
            ("assistant", reply),
            ("user", "That persona violates the constraints: "
                     + "; ".join(problems)
                     + ". Provide a corrected persona in the same format."),
        ]
    raise PersonaError(
        "persona generation failed after one retry: " + "; ".join(last_problems))


def generate_batch(spec, gateway, seed, intent=None):
    """Generate spec.count personas, rotating the prompt example."""
    assignments = sample_demographics(spec, seed)
    rng = random.Random(f"{seed}:example-rotation")
    seed_persona = load_seed_persona()
    pool = [seed_persona]
    last_example = None
    personas = []
    for assignment in assignments:
        candidates = pool
        if len(pool) >= 2 and last_example is not None:
            candidates = [p for p in pool if p is not last_example]
        example = rng.choice(candidates)
        persona = generate_persona(assignment, example, gateway)
        if intent is not None:
            persona = Persona(**{**persona.to_dict(), "intent": intent})
        personas.append(persona)
        pool.append(persona)
        last_example = example
    return personas


# -- persistence -------------------------------------------------------------


def save_personas(directory, personas):
    """One JSON file per persona plus an index listing them in order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i, persona in enumerate(personas, start=1):
        name = f"persona_{i:04d}.json"
        (directory / name).write_text(
            json.dumps(persona.to_dict(), indent=2) + "\n", encoding="utf-8")
        files.append(name)
    (directory / "index.json").write_text(
        json.dumps({"count": len(files), "files": files}, indent=2) + "\n",
        encoding="utf-8")
    return directory / "index.json"


def load_personas(path):
    """Load personas from an index.json, a directory, or a single file."""
    path = Path(path)
    if path.is_dir():
        path = path / "index.json"
    data = json.loads(path.read_text(encoding="utf-8"))
    if isinstance(data, dict) and "files" in data:
        base = path.parent
        return [Persona.from_dict(json.loads((base / name).read_text("utf-8")))
                for name in data["files"]]
    if isinstance(data, list):
        return [Persona.from_dict(d) for d in data]
    return [Persona.from_dict(data)]
