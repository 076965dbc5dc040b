import json
from collections import Counter, deque

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from crewsim.errors import ConfigInvalid, InsufficientCatalog
from crewsim.world import (CREWMATE, IMPOSTOR, GameConfig, RoomGraph, assign_tasks, default_map,
                           default_map_data, load_map, new_game, shortest_path)

GRAPH = default_map()
ROOMS = sorted(GRAPH.adjacency)


def bfs_distances(adj, src):
    dist = {src: 0}
    queue = deque([src])
    while queue:
        room = queue.popleft()
        for nb in adj[room]:
            if nb not in dist:
                dist[nb] = dist[room] + 1
                queue.append(nb)
    return dist


def test_fourteen_rooms():
    assert len(GRAPH.adjacency) == 14
    assert {"Cafeteria", "Security"} <= set(GRAPH.adjacency)
    assert GRAPH.meeting_room == "Cafeteria"
    assert GRAPH.camera_room == "Security"


def test_anchored_adjacency():
    assert set(GRAPH.neighbors("Cafeteria")) == {"Weapons", "Upper Engine", "Medbay"}
    assert set(GRAPH.neighbors("Admin")) == {"O2", "Storage", "Electrical"}
    assert "Cafeteria" in GRAPH.vent_reachable("Admin")
    assert "Electrical" in GRAPH.vent_reachable("Medbay")


def test_symmetric_irreflexive_connected():
    for a in ROOMS:
        assert a not in GRAPH.neighbors(a)
        for b in GRAPH.neighbors(a):
            assert a in GRAPH.neighbors(b)
    assert set(bfs_distances(GRAPH.adjacency, "Cafeteria")) == set(ROOMS)


def test_vent_groups_and_camera_coverage():
    assert all(len(g) >= 2 for g in GRAPH.vent_groups)
    assert set(GRAPH.camera_coverage) == set(ROOMS) - {"Security"}
    for room in ROOMS:
        assert room not in GRAPH.vent_reachable(room)


def test_rooms_host_two_or_three_tasks():
    per_room = Counter(t.room for t in default_map_data().catalog)
    assert set(per_room) == set(ROOMS)
    assert all(2 <= n <= 3 for n in per_room.values())
    for t in default_map_data().catalog:
        assert t.duration_steps == (2 if t.kind == "long" else 1)


def test_reference_tasks_present():
    cat = {(t.name, t.room, t.kind) for t in default_map_data().catalog}
    for entry in [("Fix Wiring", "Electrical", "common"), ("Fix Wiring", "Navigation", "common"),
                  ("Fix Wiring", "Admin", "common"), ("Upload Data", "Admin", "short"),
                  ("Clean O2 Filter", "O2", "short"), ("Download Data", "Communications", "short"),
                  ("Clear Asteroids", "Weapons", "long")]:
        assert entry in cat


@pytest.mark.parametrize("bad", [
    {"A": ["B"], "B": []},                  # asymmetric
    {"A": ["A", "B"], "B": ["A"]},          # self loop
    {"A": ["B"], "B": ["A"], "C": ["D"], "D": ["C"]},   # disconnected
])
def test_invalid_graphs_rejected(bad):
    with pytest.raises(ConfigInvalid):
        RoomGraph(bad, [], "A", "B")


def test_meeting_room_must_differ_from_camera_room():
    with pytest.raises(ConfigInvalid):
        RoomGraph({"A": ["B"], "B": ["A"]}, [], "A", "A")


def test_shortest_path_examples():
    assert shortest_path(GRAPH, "Cafeteria", "Cafeteria") == ["Cafeteria"]
    assert shortest_path(GRAPH, "Cafeteria", "Weapons") == ["Cafeteria", "Weapons"]


@pytest.mark.parametrize("src", ROOMS)
def test_shortest_path_matches_bfs(src):
    dist = bfs_distances(GRAPH.adjacency, src)
    for dst in ROOMS:
        path = shortest_path(GRAPH, src, dst)
        assert path[0] == src and path[-1] == dst
        assert len(path) - 1 == dist[dst]
        for a, b in zip(path, path[1:]):
            assert b in GRAPH.neighbors(a)


def test_shortest_path_tie_break_is_lexicographic():
    # enumerate every minimum-hop path and compare against the smallest sequence
    def all_shortest(src, dst):
        dist = bfs_distances(GRAPH.adjacency, dst)
        paths = [[src]]
        while paths[0][-1] != dst:
            paths = [p + [n] for p in paths for n in GRAPH.neighbors(p[-1]) if dist[n] == dist[p[-1]] - 1]
        return paths

    for src in ROOMS:
        for dst in ROOMS:
            assert shortest_path(GRAPH, src, dst) == min(all_shortest(src, dst))


def test_default_config_deal():
    state = new_game(GameConfig(seed=3))
    assert len(state.players) == 5
    assert sum(p.role == IMPOSTOR for p in state.players.values()) == 1
    assert all(p.location == "Cafeteria" for p in state.players.values())
    assert state.timestep == 0 and state.phase == "task" and state.events == []
    assert len({p.color for p in state.players.values()}) == 5


def test_common_task_shared():
    state = new_game(GameConfig(seed=11))
    common = state.common_task
    for p in state.players.values():
        if p.role == CREWMATE:
            assert [t.spec for t in p.tasks if t.spec.kind == "common"] == [common]
            assert len(p.tasks) == 3
        else:
            assert p.tasks == [] and p.known_tasks == [common]


def test_long_tasks_start_at_two_steps():
    state = new_game(GameConfig(seed=5))
    for t in state.tasks.values():
        assert t.remaining_steps == t.spec.duration_steps


def test_zero_tasks_completes_vacuously():
    from crewsim.engine import ALL_TASKS_COMPLETED, check_termination
    state = new_game(GameConfig(seed=1, tasks_per_crewmate={"common": 0, "short": 0, "long": 0}))
    assert all(p.tasks == [] for p in state.players.values())
    assert check_termination(state).condition == ALL_TASKS_COMPLETED


def test_insufficient_catalog():
    import random
    with pytest.raises(InsufficientCatalog):
        assign_tasks(GameConfig(tasks_per_crewmate={"common": 1, "short": 50, "long": 1}),
                     default_map_data().catalog, {1: CREWMATE}, random.Random(0))


@pytest.mark.parametrize("kwargs", [
    dict(n_crewmates=2, n_impostors=2),
    dict(n_impostors=0),
    dict(time_limit_steps=0),
    dict(discussion_rounds=2),
    dict(tasks_per_crewmate={"common": 2, "short": 1, "long": 1}),
    dict(n_crewmates=12),
])
def test_config_invalid(kwargs):
    with pytest.raises(ConfigInvalid):
        new_game(GameConfig(**kwargs))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**64 - 1))
def test_new_game_is_pure_function_of_config(seed):
    a, b = new_game(GameConfig(seed=seed)), new_game(GameConfig(seed=seed))
    for pid in a.players:
        pa, pb = a.players[pid], b.players[pid]
        assert (pa.color, pa.role, [t.spec for t in pa.tasks]) == (pb.color, pb.role, [t.spec for t in pb.tasks])


def test_impostor_identity_uniform():
    counts = Counter()
    for seed in range(1000):
        state = new_game(GameConfig(seed=seed))
        counts.update(p.id for p in state.players.values() if p.role == IMPOSTOR)
    observed = [counts[i] for i in range(1, 6)]
    assert chisquare(observed).pvalue > 0.001
    assert all(abs(c - 200) <= 3 * (1000 * 0.2 * 0.8) ** 0.5 for c in observed)


def test_config_round_trip():
    cfg = GameConfig(seed=9, recent_k=4)
    assert GameConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_custom_map_file(tmp_path):
    raw = {"adjacency": {"Hub": ["Lab"], "Lab": ["Hub", "Cams"], "Cams": ["Lab"]},
           "vent_groups": [["Hub", "Cams"]], "meeting_room": "Hub", "camera_room": "Cams",
           "tasks": [{"name": "Sweep", "room": "Lab", "kind": "common"},
                     {"name": "Scan", "room": "Lab", "kind": "short"},
                     {"name": "Calibrate", "room": "Hub", "kind": "long"}]}
    path = tmp_path / "map.json"
    path.write_text(json.dumps(raw))
    data = load_map(path)
    state = new_game(GameConfig(n_crewmates=2, seed=0), data)
    assert all(p.location == "Hub" for p in state.players.values())
    assert data.graph.camera_coverage == ("Hub", "Lab")
