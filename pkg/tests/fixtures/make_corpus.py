"""Regenerates malformed_responses.jsonl (run from this directory)."""

import json
import random

rng = random.Random(20240611)

TTT_ALL = [[r, c] for r in range(1, 4) for c in range(1, 4)]
KUHN = ["PASS", "BET"]
SOKO = ["up", "down", "left", "right"]

cases = []


def add(env, text, admissible, expect=None):
    cases.append({"env": env, "text": text, "admissible": admissible, "expect": expect})


def ttt_adm():
    cells = rng.sample(TTT_ALL, rng.randint(1, 9))
    return sorted(cells)


# exact tags: must parse to exactly the tagged action
for _ in range(40):
    adm = ttt_adm()
    r, c = rng.choice(adm)
    fmt = rng.choice(["({r},{c})", "( {r} , {c} )", "{r},{c}", "({r}, {c})"])
    pre = rng.choice(["", "Let me think. ", "Center is taken, so (9,9) is silly.\n", "<think>(1,1)?</think> "])
    add("tictactoe", f"{pre}<action>{fmt.format(r=r, c=c)}</action>", adm, [r, c])
for _ in range(25):
    a = rng.choice(KUHN)
    pre = rng.choice(["", "I have K, I will BET. ", "Folding is bad; PASS maybe? ", "hmm\n\n"])
    tag = rng.choice(["<action>{a}</action>", "<ACTION>{a}</ACTION>", "<action> {a} </action>"])
    add("kuhn", pre + tag.format(a=a if rng.random() < 0.7 else a.lower()), KUHN, a)
for _ in range(25):
    k = rng.randint(1, 3)
    moves = [rng.choice(SOKO) for _ in range(k)]
    sep = rng.choice([", ", " ", ",", " then "])
    add("sokoban", f"Plan: push box.<action>{sep.join(moves)}</action>", SOKO, moves)

# multiple tags: last one wins
add("tictactoe", "<action>(1,1)</action> no wait <action>(3,3)</action>", TTT_ALL, [3, 3])
add("kuhn", "<action>BET</action><action>PASS</action>", KUHN, "PASS")
add("sokoban", "<action>up</action>\n<action>left, left</action>", SOKO, ["left", "left"])

# lenient fallbacks without tags
add("tictactoe", "I will play the corner (1, 3)", TTT_ALL, [1, 3])
add("tictactoe", "Options (1,1) or (2,2); choosing (2,2).", TTT_ALL, [2, 2])
add("kuhn", "My decision: bet", KUHN, "BET")
add("kuhn", "I check.", KUHN, "PASS")
add("sokoban", "Move up then right", SOKO, ["up", "right"])

# malformed: any outcome is fine as long as nothing crashes
garbage = [
    "", " ", "\x00\x00\x00", "<action>", "</action>", "<action></action>", "<action>(</action>",
    "<action>(1,</action>", "<action>(a,b)</action>", "<action>(10,10)</action>", "<action>(0,0)</action>",
    "<action>(-1,2)</action>", "<action>(1.5,2)</action>", "<action>((1,1))</action>",
    "<action>[1,1]</action>", "<action>{\"row\": 1, \"col\": 1}</action>", "<action>PASSBET</action>",
    "<action>FOLDCALL</action>", "<action>up up up up up</action>", "<action>north</action>",
    "<action>UP; DOWN</action>", "<action>(1,1)(2,2)</action>", "<actio>(1,1)</actio>",
    "<action>(1,1)</action", "action>(1,1)</action>", "<<action>>(1,1)<</action>>",
    "💣💣💣", "(٣,٣)", "(１,１)", "<action>​(1,1)​</action>", "a" * 20000,
    "<action>" + "(1,1)" * 500 + "</action>", "<action>" * 200, "</action>" * 200,
    "```json\n{\"action\": \"BET\"}\n```", "None", "null", "NaN", "-1", "999999999999999999999",
    "(99999999999999999999999999,1)", "\\u003caction\\u003e(1,1)\\u003c/action\\u003e",
    "<ACTION>bet</action>", "<action>\n\n</action>", "\r\n\t", "<action>left right up down</action>",
    "<action>LeFt</action>", "b'\\xff\\xfe'", "<action>%s</action>", "{admissible_actions}",
]
for text in garbage:
    env = rng.choice(["tictactoe", "kuhn", "sokoban"])
    adm = {"tictactoe": ttt_adm(), "kuhn": KUHN, "sokoban": SOKO}[env]
    add(env, text, adm)

# random byte noise, with and without tags
while len(cases) < 200:
    n = rng.randint(0, 300)
    noise = bytes(rng.randrange(256) for _ in range(n)).decode("latin-1")
    if rng.random() < 0.5:
        noise = noise[: n // 2] + "<action>" + noise[n // 2:]
    env = rng.choice(["tictactoe", "kuhn", "sokoban"])
    adm = {"tictactoe": ttt_adm(), "kuhn": KUHN, "sokoban": SOKO}[env]
    add(env, noise, adm)

with open("malformed_responses.jsonl", "w", encoding="utf-8") as fh:
    for c in cases:
        fh.write(json.dumps(c, ensure_ascii=True) + "\n")
print(len(cases))
