"""FastAPI service wrapping the crowd model.

Stateless endpoints expose the schema, trace validation, simulation and
classification. Stateful endpoints manage server-side worlds so several
observers can record one live session; writes to a world are serialized
through a per-world lock (the engine itself is single-writer).
"""

from __future__ import annotations

import threading
import uuid

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse

from ..classify import ClassifierConfig, Sample, series_to_transitions
from ..engine import DispatchReport, World
from ..errors import CrowdModelError, TraceReplayError, TraceSyntaxError, UnknownThreadError
from ..rules import EventRule, ReactionRule, ThreadSelector
from ..schema import ALL_STATES, Phase, SchemaOptions, TERMINAL, default_schema, state
from ..stochastic import WalkConfig, WeightTable, parse_weights, walk
from ..trace import parse as parse_trace
from ..trace import replay
from . import schemas as api


class WorldStore:
    """In-memory session registry: world id -> (world, lock)."""

    def __init__(self):
        self._worlds: dict[str, tuple[World, threading.Lock]] = {}
        self._registry_lock = threading.Lock()

    def create(self, world: World) -> str:
        world_id = uuid.uuid4().hex[:12]
        with self._registry_lock:
            self._worlds[world_id] = (world, threading.Lock())
        return world_id

    def get(self, world_id: str) -> tuple[World, threading.Lock]:
        try:
            return self._worlds[world_id]
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown world: {world_id}")


def create_app() -> FastAPI:
    app = FastAPI(
        title="crowdstates",
        description="Dynamic state-based crowd model: schema queries, trace replay, "
        "stochastic simulation, structure classification and live world sessions.",
    )
    store = WorldStore()
    schema = default_schema()

    @app.exception_handler(CrowdModelError)
    async def _domain_error(request, exc: CrowdModelError):
        from fastapi.responses import JSONResponse

        status = 404 if isinstance(exc, UnknownThreadError) else 409
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    # -- model ------------------------------------------------------------

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/model/states", response_model=list[api.StateInfo])
    def model_states():
        return [api.StateInfo(name=s.name, phase=s.phase.value) for s in ALL_STATES]

    @app.get("/model/transitions/{state_name}", response_model=api.TransitionsOut)
    def model_transitions(state_name: str):
        try:
            frm = state(state_name)
        except CrowdModelError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        targets = schema.legal_transitions_from(frm)
        return api.TransitionsOut(state=frm.name, targets=[t.name for t in targets])

    @app.get("/model/dot", response_class=PlainTextResponse)
    def model_dot():
        return schema.to_dot()

    # -- stateless operations ----------------------------------------------

    @app.post("/validate", response_model=api.ValidateOut)
    def validate(body: api.TraceIn):
        try:
            trace = parse_trace(body.text, source="request")
            _, report = replay(trace)
        except TraceSyntaxError as exc:
            return api.ValidateOut(
                ok=False,
                error={"line": exc.line, "column": exc.column, "reason": exc.reason},
            )
        except TraceReplayError as exc:
            return api.ValidateOut(ok=False, error={"line": exc.line, "reason": exc.reason})
        return api.ValidateOut(ok=True, report=report.as_dict())

    @app.post("/simulate", response_model=api.SimulateOut)
    def simulate(body: api.SimulateIn):
        start = state(body.start)
        if start == TERMINAL:
            raise HTTPException(status_code=422, detail="start state has no outgoing transitions")
        table = (
            parse_weights(body.weights_text, schema)
            if body.weights_text is not None
            else WeightTable()
        )
        result = walk(table, schema, WalkConfig(seed=body.seed, max_steps=body.steps, start=start))
        lines = []
        states = result.states
        if start.phase is Phase.ASSEMBLY:
            lines.append(f"thread 1 assemble {start.local}")
            states = states[1:]
        for visited in states:
            lines.append("thread 1 end" if visited == TERMINAL else f"thread 1 goto {visited.name}")
        return api.SimulateOut(
            states=[s.name for s in result.states],
            terminated=result.terminated,
            trace="\n".join(lines) + "\n",
        )

    @app.post("/classify", response_model=api.ClassifyOut)
    def classify(body: api.ClassifyIn):
        config = (
            ClassifierConfig(**body.config.model_dump()) if body.config else ClassifierConfig()
        )
        samples = [Sample(s.timestamp, s.density, s.speed, s.order) for s in body.samples]
        transitions = series_to_transitions(config, samples)
        return api.ClassifyOut(
            transitions=[
                api.ClassifiedTransition(timestamp=t, state=s.name) for t, s in transitions
            ]
        )

    # -- world sessions ------------------------------------------------------

    @app.post("/worlds", response_model=api.WorldCreated, status_code=201)
    def create_world(body: api.WorldCreate | None = None):
        options = body.options if body else api.SchemaOptionsIn()
        world = World(default_schema(SchemaOptions(**options.model_dump())))
        return api.WorldCreated(world_id=store.create(world))

    @app.post("/worlds/from-trace", response_model=api.WorldFromTraceOut, status_code=201)
    def create_world_from_trace(body: api.TraceIn):
        try:
            world, report = replay(parse_trace(body.text, source="request"))
        except (TraceSyntaxError, TraceReplayError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return api.WorldFromTraceOut(world_id=store.create(world), report=report.as_dict())

    @app.get("/worlds/{world_id}", response_model=api.WorldOut)
    def get_world(world_id: str):
        world, lock = store.get(world_id)
        with lock:
            return api.WorldOut.from_world(world_id, world)

    @app.post("/worlds/{world_id}/threads", response_model=api.ThreadOut, status_code=201)
    def spawn(world_id: str, body: api.SpawnIn):
        world, lock = store.get(world_id)
        with lock:
            tid = world.spawn_thread(state(body.assembly_state), body.timestamp, body.note)
            return api.ThreadOut.from_view(world.inspect(tid))

    @app.get("/worlds/{world_id}/threads/{thread_id}", response_model=api.ThreadOut)
    def inspect(world_id: str, thread_id: int):
        world, lock = store.get(world_id)
        with lock:
            return api.ThreadOut.from_view(world.inspect(thread_id))

    @app.post(
        "/worlds/{world_id}/threads/{thread_id}/transition",
        response_model=api.TransitionOut,
    )
    def transition(world_id: str, thread_id: int, body: api.TransitionIn):
        world, lock = store.get(world_id)
        with lock:
            reactions = DispatchReport()
            view = world.apply_transition(
                thread_id, state(body.to), body.timestamp, body.note, report=reactions
            )
            return api.TransitionOut(
                thread=api.ThreadOut.from_view(view),
                reactions=api.DispatchOut.from_report(reactions),
            )

    @app.post(
        "/worlds/{world_id}/threads/{thread_id}/fork",
        response_model=api.ThreadOut,
        status_code=201,
    )
    def fork(world_id: str, thread_id: int, body: api.ForkIn):
        world, lock = store.get(world_id)
        with lock:
            child = world.fork_thread(
                thread_id,
                state(body.assembly_state),
                state(body.initial) if body.initial is not None else None,
                body.timestamp,
                body.note,
            )
            return api.ThreadOut.from_view(world.inspect(child))

    @app.post("/worlds/{world_id}/rules/event", response_model=api.RuleCreated, status_code=201)
    def add_event_rule(world_id: str, body: api.EventRuleIn):
        world, lock = store.get(world_id)
        with lock:
            index = world.register_event_rule(
                EventRule(body.event, ThreadSelector.parse(body.selector), state(body.target))
            )
            return api.RuleCreated(index=index)

    @app.post("/worlds/{world_id}/rules/reaction", response_model=api.RuleCreated, status_code=201)
    def add_reaction_rule(world_id: str, body: api.ReactionRuleIn):
        world, lock = store.get(world_id)
        with lock:
            index = world.register_reaction_rule(
                ReactionRule(
                    state(body.watched_state),
                    ThreadSelector.parse(body.affected_selector),
                    state(body.target),
                    watched_selector=ThreadSelector.parse(body.watched_selector),
                )
            )
            return api.RuleCreated(index=index)

    @app.post("/worlds/{world_id}/events", response_model=api.DispatchOut)
    def dispatch(world_id: str, body: api.EventIn):
        world, lock = store.get(world_id)
        with lock:
            report = world.dispatch_event(body.name, body.timestamp)
            return api.DispatchOut.from_report(report)

    return app


app = create_app()
