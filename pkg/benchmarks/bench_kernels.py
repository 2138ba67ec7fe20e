"""Time the compiled scanning kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--files 300] [--repeat 5]

Both backends run over the same synthetic corpus and must return identical
results; the script aborts otherwise.
"""
import argparse
import random
import sys
import timeit

from iacmetrics import _kernels_py

TEMPLATE = """\
# {marker} review the retry policy
- name: "Install {{{{ pkg_{i} | default('httpd') }}}}"
  yum:
    name: "{{{{ item }}}}"
    state: latest
  loop: "{{{{ packages | product(['a', 'b']) | list }}}}"
  when: ansible_os_family == 'RedHat' and (count_{i} * 2 // 3 >= 1 or not skip)

- name: Fetch {i}
  uri:
    url: "http://example.com/{{{{ lookup('env', 'PATH_{i}') }}}}"   # trailing note
    dest: /tmp/out_{i}

"""


def make_corpus(files, seed=0):
    rng = random.Random(seed)
    docs = []
    for _ in range(files):
        parts = [TEMPLATE.format(i=rng.randint(0, 999), marker=rng.choice(["TODO", "note"])) for _ in range(rng.randint(3, 12))]
        docs.append("".join(parts))
    return docs


def run(kernels, docs):
    out = []
    for text in docs:
        out.append(kernels.classify_lines(text))
        spans, bad = kernels.find_expressions(text)
        out.append((spans, bad))
        for start, end in spans:
            out.append(kernels.lex(text[start:end]))
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--files", type=int, default=300)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    try:
        from iacmetrics import _kernels_cy
    except ImportError:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
        return 1

    docs = make_corpus(args.files)
    size = sum(len(d) for d in docs)
    if run(_kernels_cy, docs) != run(_kernels_py, docs):
        print("backends disagree", file=sys.stderr)
        return 2

    print(f"corpus: {len(docs)} files, {size / 1e6:.2f} MB")
    timings = {}
    for label, kernels in (("python", _kernels_py), ("cython", _kernels_cy)):
        best = min(timeit.repeat(lambda: run(kernels, docs), number=1, repeat=args.repeat))
        timings[label] = best
        print(f"{label:>7}: {best * 1000:8.1f} ms  ({size / best / 1e6:6.1f} MB/s)")
    print(f"speedup: {timings['python'] / timings['cython']:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
