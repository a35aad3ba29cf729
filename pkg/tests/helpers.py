"""Shared generators for tests: random states, applicable actions and small problems."""

from __future__ import annotations

import random
from pathlib import Path

from hypothesis import strategies as st

from pstarbench.core import Chain, PickUp, PutDown, Retrieve, Stack, Unstack, WorldState, predicates_from_state
from pstarbench.generator import CurriculumParams, generate_instance
from pstarbench.pddl import ProblemDoc

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def random_state(rng: random.Random, n: int, max_towers: int | None = None, allow_held: bool = True) -> WorldState:
    blocks = list(range(1, n + 1))
    rng.shuffle(blocks)
    held = blocks.pop() if allow_held and n > 1 and rng.random() < 0.3 else None
    k = rng.randint(1, min(len(blocks), max_towers or len(blocks)))
    cuts = sorted(rng.sample(range(1, len(blocks)), k - 1))
    towers = [tuple(blocks[a:b]) for a, b in zip([0, *cuts], [*cuts, len(blocks)])]
    return WorldState(tuple(towers), held)


def applicable_actions(state: WorldState) -> list:
    tops = [t[-1] for t in state.towers]
    if state.held is None:
        return [PickUp(t[-1]) if len(t) == 1 else Unstack(t[-1], t[-2]) for t in state.towers]
    return [PutDown(state.held)] + [Stack(state.held, top) for top in tops]


@st.composite
def states(draw, min_blocks: int = 1, max_blocks: int = 8, allow_held: bool = True) -> WorldState:
    n = draw(st.integers(min_blocks, max_blocks))
    blocks = draw(st.permutations(range(1, n + 1)))
    held = None
    if allow_held and n > 1 and draw(st.booleans()):
        held, blocks = blocks[-1], blocks[:-1]
    cuts = draw(st.sets(st.integers(1, len(blocks) - 1), max_size=len(blocks) - 1)) if len(blocks) > 1 else set()
    bounds = [0, *sorted(cuts), len(blocks)]
    return WorldState(tuple(tuple(blocks[a:b]) for a, b in zip(bounds, bounds[1:])), held)


@st.composite
def state_and_walk(draw, max_blocks: int = 7, max_steps: int = 12):
    """A state plus a random applicable action sequence from it."""
    from pstarbench.core import apply

    s = draw(states(max_blocks=max_blocks))
    plan, cur = [], s
    for _ in range(draw(st.integers(0, max_steps))):
        a = draw(st.sampled_from(applicable_actions(cur)))
        plan.append(a)
        cur = apply(cur, a)
    return s, plan


def small_chain_problem(rng: random.Random, max_blocks: int = 6, max_towers: int = 3) -> ProblemDoc:
    """Chain goal over distinct towers with the base at the bottom of its tower."""
    while True:
        s = random_state(rng, rng.randint(2, max_blocks), max_towers, allow_held=False)
        if len(s.towers) >= 2:
            break
    k = rng.randint(2, len(s.towers))
    picked = rng.sample(range(len(s.towers)), k)
    targets = [s.towers[picked[0]][0]] + [rng.choice(s.towers[i]) for i in picked[1:]]
    init = predicates_from_state(s)
    rng.shuffle(init)
    return ProblemDoc("chain-test", tuple(range(1, s.n_blocks + 1)), tuple(init), Chain(tuple(targets)))


def small_retrieve_problem(rng: random.Random, max_blocks: int = 6, max_towers: int = 3) -> ProblemDoc:
    s = random_state(rng, rng.randint(1, max_blocks), max_towers, allow_held=False)
    init = predicates_from_state(s)
    rng.shuffle(init)
    return ProblemDoc("retrieve-test", tuple(range(1, s.n_blocks + 1)), tuple(init), Retrieve(rng.randint(1, s.n_blocks)))


def random_params(rng: random.Random, max_width: int = 6, max_h: int = 6) -> CurriculumParams:
    mode = rng.choice(["chain", "retrieve", "interleaved"])
    width = rng.randint(2 if mode == "chain" else 1, max_width)
    if mode == "interleaved":
        h_min = rng.randint(3, max_h)
        return CurriculumParams(width, h_min, rng.randint(h_min, max_h), 2 * width, mode)
    h_min = rng.randint(1, max_h)
    targets = 1 if mode == "retrieve" else rng.randint(2, width)
    return CurriculumParams(width, h_min, rng.randint(h_min, max_h), targets, mode)


def random_instances(seed: int, count: int, **kw) -> list:
    rng = random.Random(seed)
    return [generate_instance(random_params(rng, **kw), rng.getrandbits(64)) for _ in range(count)]
