"""Regenerates the mock fixtures in this directory."""
import json
import pathlib

HERE = pathlib.Path(__file__).parent

QUESTIONS = [
    {
        "id": "q1", "category": "generic", "use_sot": True, "router": "A",
        "text": "How can I improve my time management skills?",
        "normal": "Start by tracking how you spend a typical week, then set clear priorities, "
                  "block time on your calendar for deep work, and review your plan every evening.",
        "points": [
            ("Track your time.", " Log a full week of activities to see where the hours actually go."),
            ("Set clear priorities.", " Rank tasks by impact and deadline so the important work happens first."),
            ("Review daily.", " Spend five minutes each evening adjusting tomorrow's plan."),
        ],
    },
    {
        "id": "q2", "category": "knowledge", "use_sot": True, "router": "A",
        "text": "What are the main differences between Python and JavaScript?",
        "normal": "Python is a general-purpose language favoured for scripting and data work, while "
                  "JavaScript is the language of the browser; they differ in typing rules, "
                  "concurrency models, and standard libraries.",
        "points": [
            ("Execution environment.", " JavaScript runs natively in browsers while Python usually runs on servers and desktops."),
            ("Typing rules.", " JavaScript coerces types freely whereas Python raises errors on mismatched types."),
            ("Concurrency model.", " JavaScript centres on an event loop and Python offers threads, processes and asyncio."),
            ("Standard library.", " Python ships a large standard library and JavaScript leans on npm packages."),
        ],
    },
    {
        "id": "q3", "category": "roleplay", "use_sot": True, "router": "A",
        "text": "Pretend you are a tour guide and describe the highlights of a walk through an old harbour town.",
        "normal": "Welcome aboard! We begin at the lighthouse, wander past the fish market, and finish "
                  "with a view from the old city walls as the fishing boats come home.",
        "points": [
            ("The lighthouse.", " Our walk starts at the white lighthouse that has guided sailors for two centuries."),
            ("The fish market.", " Next we pass the morning market where the day's catch is sold straight from the boats."),
            ("The city walls.", " We finish on the old walls with a sweeping view over the harbour at sunset."),
        ],
    },
    {
        "id": "q4", "category": "fermi", "use_sot": False, "router": "B",
        "text": "How many piano tuners work in a city of three million people? Explain your reasoning step by step.",
        "normal": "Assume one household in twenty owns a piano, each piano is tuned once a year, and a tuner "
                  "services about a thousand pianos a year; that gives roughly seventy-five tuners.",
        "points": [
            ("Estimate the pianos.", " About one household in twenty owns a piano, giving roughly seventy-five thousand pianos."),
            ("Estimate tuner capacity.", " A tuner can service about a thousand pianos a year, so about seventy-five tuners are needed."),
        ],
    },
    {
        "id": "q5", "category": "coding", "use_sot": False, "router": "C",
        "text": "Write a Python function that checks whether a string is a palindrome.",
        "normal": "def is_palindrome(s):\n    cleaned = ''.join(c.lower() for c in s if c.isalnum())\n    return cleaned == cleaned[::-1]",
        "points": [
            ("Normalize the string.", " Lowercase the input and keep only alphanumeric characters."),
            ("Compare with its reverse.", " Return whether the cleaned string equals cleaned[::-1]."),
        ],
    },
    {
        "id": "q6", "category": "math", "use_sot": False, "router": "C",
        "text": "Solve for x: 3x + 7 = 22.",
        "normal": "Subtract 7 from both sides to get 3x = 15, then divide by 3 to get x = 5.",
        # The model answers without a skeleton; SoT has to fall back.
        "points": None,
    },
]

# Router replies with the decision a careful reader would take from each.
ROUTER_REPLIES = [
    ("A", True), ("B", False), ("C", False), ("A.", True), ("B.", False),
    ("C.", False), ("(A)", True), ("(B)", False), ("[C]", False), ("A\n", True),
    ("  A  ", True), ("\nB\n", False), ("Answer: A", True), ("Answer: B", False),
    ("Answer: C", False), ("I choose A.", True), ("I choose B.", False),
    ("I choose C because it is math.", False), ("A. It has independent points.", True),
    ("B. Needs step-by-step reasoning.", False), ("C. Short answer.", False),
    ("Option A", True), ("Option C", False), ("A: yes", True), ("B: no", False),
    ("A, because the points are independent.", True), ("C, since it is code.", False),
    ("The answer is B", False), ("The answer is A", True), ("a", False), ("b", False),
    ("c", False), ("", False), ("None of them.", False), ("I cannot decide.", False),
    ("ABC", False), ("AB", False), ("A1", False), ("Plan B", False), ("Type-A", True),
    ("\"A\"", True), ("A/B", True), ("B or A", False), ("C then A", False),
    ("**A**", True), ("`B`", False), ("Apple", False), ("Category: Alpha", False),
    ("1. A", True), ("Choice 2 (B)", False),
]

PREFILL = 0.0005
DECODE = 0.02


def entry(name, response, exact=None, contains=None):
    e = {"name": name}
    if exact is not None:
        e["exact"] = exact
    if contains is not None:
        e["contains"] = contains
    e["response"] = response
    e["prefill_s_per_token"] = PREFILL
    e["decode_s_per_token"] = DECODE
    return e


def main():
    entries = []
    for q in QUESTIONS:
        entries.append(entry(f"{q['id']}-normal", q["normal"], exact=q["text"]))
        entries.append(entry(f"{q['id']}-router", q["router"],
                             contains=[q["text"], "How would you like to answer the question?"]))
        if q["points"] is None:
            skeleton = ""
        else:
            lines = [f"{i}. {p[0]}" for i, p in enumerate(q["points"], 1)]
            # The backend was handed "1." as the partial answer; the reply continues it.
            skeleton = "\n".join(lines)[2:]
        entries.append(entry(f"{q['id']}-skeleton", skeleton,
                             contains=[q["text"], "provide the skeleton for the following question"]))
        for i, p in enumerate(q["points"] or [], 1):
            entries.append(entry(f"{q['id']}-point{i}", p[1],
                                 contains=[q["text"], f"Continue and only continue the writing of point {i}."]))
    (HERE / "mock_script.json").write_text(json.dumps({"entries": entries}, indent=2) + "\n")

    with open(HERE / "questions.jsonl", "w") as f:
        for q in QUESTIONS:
            f.write(json.dumps({"id": q["id"], "category": q["category"], "text": q["text"]}) + "\n")
    with open(HERE / "labels.jsonl", "w") as f:
        for q in QUESTIONS:
            f.write(json.dumps({"id": q["id"], "use_sot": q["use_sot"]}) + "\n")

    judge = [
        {"name": "sot-first", "contains": ["[Question]", "[Answer 1]\n1. "],
         "response": "Answer 1 covers the question more systematically.\n[[A]]"},
        {"name": "sot-second", "contains": ["[Question]"],
         "response": "Answer 2 is better organised.\n[[B]]"},
    ]
    (HERE / "judge_script.json").write_text(json.dumps({"entries": judge}, indent=2) + "\n")

    assert len(ROUTER_REPLIES) == 50
    with open(HERE / "router_replies.jsonl", "w") as f:
        for reply, use_sot in ROUTER_REPLIES:
            f.write(json.dumps({"reply": reply, "use_sot": use_sot}) + "\n")


if __name__ == "__main__":
    main()
