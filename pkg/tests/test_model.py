import random
from collections import Counter

import pytest
import yaml
from hypothesis import given, settings, strategies as st

import gen
import oracle
from conftest import fixture_text
from iacmetrics.model import (
    FileKind,
    ParseError,
    iterate_tasks,
    extract_plays,
    parse_source,
    parse_yaml,
    walk_mappings,
)


def kind_of(text):
    return parse_source("x.yml", text).kind


def test_empty_file_has_no_documents():
    f = parse_source("empty.yml", "")
    assert f.documents == ()
    assert f.kind is FileKind.UNKNOWN
    assert f.error is None


def test_hosts_item_makes_a_playbook():
    assert kind_of("- hosts: webservers\n") is FileKind.PLAYBOOK


# Twenty snippets classified by hand.
HAND_CLASSIFIED = [
    ("- hosts: all\n  tasks: []\n", FileKind.PLAYBOOK),
    ("- import_playbook: site.yml\n", FileKind.PLAYBOOK),
    ("- name: a\n  yum: {name: x}\n- hosts: db\n", FileKind.PLAYBOOK),
    ("---\n- hosts: web\n---\n- debug: {msg: hi}\n", FileKind.PLAYBOOK),
    ("- name: install\n  yum:\n    name: httpd\n", FileKind.TASKS_FILE),
    ("- debug: msg=hi\n- command: /bin/true\n", FileKind.TASKS_FILE),
    ("- block:\n    - debug: {msg: x}\n", FileKind.TASKS_FILE),
    ("- include_tasks: other.yml\n", FileKind.TASKS_FILE),
    ("[]\n", FileKind.TASKS_FILE),
    ("- just a string\n- another\n", FileKind.TASKS_FILE),
    ("- name: handler\n  service: {name: x, state: restarted}\n", FileKind.TASKS_FILE),
    ("- role: common\n  when: x\n", FileKind.TASKS_FILE),
    ("- name: hosts is only a parameter here\n  add_host:\n    hosts: web\n", FileKind.TASKS_FILE),
    ("http_port: 80\nmax_clients: 200\n", FileKind.UNKNOWN),
    ("hosts: all\ntasks: []\n", FileKind.UNKNOWN),
    ("just a scalar\n", FileKind.UNKNOWN),
    ("# only a comment\n", FileKind.UNKNOWN),
    ("---\n...\n", FileKind.UNKNOWN),
    ("dependencies:\n  - role: common\n", FileKind.UNKNOWN),
    ("galaxy_info:\n  author: me\n", FileKind.UNKNOWN),
]


@pytest.mark.parametrize("text,expected", HAND_CLASSIFIED)
def test_classification_matches_hand_labels(text, expected):
    assert kind_of(text) is expected


def test_malformed_yaml_degrades_gracefully():
    f = parse_source("bad.yml", "- name: x\n\tshell: echo\n")
    assert isinstance(f.error, ParseError)
    assert f.error.line == 2
    assert f.documents == ()
    assert f.kind is FileKind.UNKNOWN
    assert f.raw_text.startswith("- name")


def test_parse_yaml_raises_parse_error():
    with pytest.raises(ParseError):
        parse_yaml("a: [1, 2\n")


def test_multi_document_stream_keeps_every_document():
    f = parse_source("m.yml", "---\n- debug: {msg: a}\n---\n- debug: {msg: b}\n")
    assert len(f.documents) == 2
    assert f.kind is FileKind.TASKS_FILE


def test_extract_plays_on_playbook(playbook):
    plays = extract_plays(playbook)
    assert [p.hosts.text for p in plays] == ["webservers", "databases"]
    assert list(plays[0].vars.keys()) == ["http_port"]
    assert set(plays[1].tasks_sections) == {"tasks"}


def test_extract_plays_on_tasks_file(guarded):
    assert extract_plays(guarded) == []


def test_three_hosts_items_give_three_plays():
    text = "- hosts: a\n- hosts: b\n- import_playbook: x.yml\n- hosts: c\n"
    naive = sum(1 for item in yaml.safe_load(text) if "hosts" in item)
    assert naive == 3
    assert len(extract_plays(parse_source("p.yml", text))) == 3


def _leaves(tasks):
    return [t for t in tasks if not t.is_block]


def test_playbook_has_three_leaf_tasks(playbook):
    leaves = _leaves(iterate_tasks(playbook.documents[0]))
    assert [t.module.key for t in leaves] == ["yum", "yum", "service"]


def test_empty_play_has_no_tasks():
    f = parse_source("p.yml", "- hosts: all\n")
    assert iterate_tasks(f.documents[0]) == []
    assert iterate_tasks(extract_plays(f)[0]) == []


def test_blocks_leaf_tasks_by_enumeration(blocks):
    tasks = iterate_tasks(blocks.documents[0])
    leaves = _leaves(tasks)
    # block 1: debug, command; rescue: debug; always: debug; block 2: yum, service
    assert [t.module.key for t in leaves] == ["debug", "command", "debug", "debug", "yum", "service"]
    assert [t.node.start_line for t in leaves] == [4, 6, 9, 12, 17, 23]
    naive = [t for t in oracle._task_tree(yaml.safe_load(fixture_text("block_rescue.yml"))) if "block" not in t]
    assert len(naive) == len(leaves)
    block_entries = [t for t in tasks if t.is_block]
    assert [b.name for b in block_entries] == ["Attempt and graceful roll back demo", "Install, configure, and start Apache"]
    assert all(b.module is None for b in block_entries)


def test_module_parameters_named_name_are_not_task_names(blocks):
    leaves = _leaves(iterate_tasks(blocks.documents[0]))
    yum = leaves[4]
    assert yum.name == "Install httpd and memcached"
    assert yum.module.params.get("name").kind == "sequence"


def test_handlers_switch():
    text = "- hosts: all\n  tasks:\n    - ping:\n  handlers:\n    - name: h\n      service: {name: x}\n"
    doc = parse_source("p.yml", text).documents[0]
    assert len(iterate_tasks(doc)) == 2
    assert len(iterate_tasks(doc, include_handlers=False)) == 1


def test_ambiguous_module_is_recorded():
    doc = parse_source("t.yml", "- name: x\n  yum: {}\n  apt: {}\n- name: y\n  when: z\n").documents[0]
    two, zero = iterate_tasks(doc)
    assert two.module is None and two.ambiguity == ("yum", "apt")
    assert zero.module is None and zero.ambiguity == ()


@given(st.integers(min_value=0, max_value=30))
def test_flat_task_list_yields_n_entries(n):
    text = "".join(f"- name: t{i}\n  debug: {{msg: {i}}}\n" for i in range(n)) or "[]\n"
    assert len(iterate_tasks(parse_source("t.yml", text).documents[0])) == n


def test_walk_mappings_on_scalar_is_empty():
    doc = parse_source("s.yml", "hello\n").documents[0]
    assert list(walk_mappings(doc)) == []


def test_walk_mappings_is_depth_first():
    doc = parse_source("m.yml", "{a: {b: 1}, c: 2}\n").documents[0]
    stream = [(k, v.value if v.is_scalar else None, d) for k, v, d in walk_mappings(doc)]
    assert stream == [("a", None, 0), ("b", 1, 1), ("c", 2, 0)]


def test_walk_mappings_guarded_file_and_mode(guarded):
    keys = Counter(k for doc in guarded.documents for k, _, _ in walk_mappings(doc))
    assert keys["file"] == 1
    assert keys["mode"] == 1


def test_walk_mappings_matches_naive_traversal():
    rng = random.Random(7)
    for _ in range(150):
        obj = gen.document(rng)
        text = gen.dump(obj)
        doc = parse_source("r.yml", text).documents[0]
        assert Counter(k for k, _, _ in walk_mappings(doc)) == Counter(oracle.all_keys(obj))


def test_aliases_and_merge_keys_are_resolved():
    text = (
        "base: &base\n"
        "  become: true\n"
        "  tags: [a]\n"
        "task:\n"
        "  <<: *base\n"
        "  tags: [b]\n"
        "  name: merged\n"
    )
    doc = parse_source("a.yml", text).documents[0]
    task = doc.get("task")
    assert task.keys() == ["become", "tags", "name"]
    assert [i.text for i in task.get("tags").items] == ["b"]
    assert task.get("become").span == (5, 5)
    assert doc.to_python() == yaml.safe_load(text)


def test_merge_key_with_sequence_of_maps():
    text = "a: &a {x: 1}\nb: &b {x: 2, y: 3}\nc:\n  <<: [*a, *b]\n"
    doc = parse_source("m.yml", text).documents[0]
    assert doc.to_python()["c"] == {"x": 1, "y": 3}
    assert doc.to_python() == yaml.safe_load(text)


def test_alias_bomb_is_rejected(monkeypatch):
    import iacmetrics.model as model

    monkeypatch.setattr(model, "MAX_NODES", 1000)
    lines = ["a0: &a0 [x, x, x, x, x, x, x, x, x, x]"]
    for i in range(1, 6):
        lines.append(f"a{i}: &a{i} [" + ", ".join([f"*a{i-1}"] * 10) + "]")
    f = parse_source("bomb.yml", "\n".join(lines) + "\n")
    assert f.error is not None
    assert "too many nodes" in f.error.message


def test_playbook_task_spans(playbook):
    leaves = _leaves(iterate_tasks(playbook.documents[0]))
    assert [t.node.span for t in leaves] == [(7, 10), (16, 19), (21, 24)]


def test_block_scalar_span_excludes_following_key():
    text = "- name: a\n  shell: |\n    echo 1\n    echo 2\n\n- name: b\n  ping:\n"
    first, second = iterate_tasks(parse_source("t.yml", text).documents[0])
    assert first.node.span == (1, 5)
    assert second.node.span == (6, 7)


def _spans_contained(node, lo, hi):
    assert lo <= node.start_line <= node.end_line <= hi, (node.span, lo, hi)
    for _, child in node.entries:
        _spans_contained(child, node.start_line, node.end_line)
    for child in node.items:
        _spans_contained(child, node.start_line, node.end_line)


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=10**9), st.booleans())
def test_span_containment(seed, flow):
    rng = random.Random(seed)
    obj = gen.document(rng)
    text = yaml.safe_dump(obj, default_flow_style=None if flow else False, sort_keys=False)
    f = parse_source("r.yml", text)
    total = max(1, len(text.splitlines()))
    for doc in f.documents:
        _spans_contained(doc, 1, total)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_classification_survives_reserialization(seed):
    obj = gen.document(random.Random(seed))
    first = parse_source("a.yml", gen.dump(obj))
    again = parse_source("b.yml", yaml.safe_dump(first.documents[0].to_python(), sort_keys=False))
    assert first.kind is again.kind
