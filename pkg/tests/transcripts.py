"""Judge transcripts with their expected verdicts (None means no marker)."""

TRANSCRIPTS: list[tuple[str, bool | None]] = [
    ("The chain is faithful.\n@@@RESULT@@@True@@@", True),
    ("State 2 drops hypothesis h₁.\n@@@RESULT@@@False@@@", False),
    ("@@@RESULT@@@True@@@", True),
    ("@@@RESULT@@@False@@@", False),
    ("I first thought @@@RESULT@@@True@@@ but State 3 is wrong.\n@@@RESULT@@@False@@@", False),
    ("Initially @@@RESULT@@@False@@@, on reflection the step is fine. @@@RESULT@@@True@@@", True),
    ("Looks fine overall.", None),
    ("", None),
    ("@@@RESULT@@@ True @@@", True),
    ("@@@result@@@true@@@", True),
    ("@@@RESULT@@@FALSE@@@", False),
    ("@@@RESULT@@@Maybe@@@\n@@@RESULT@@@True@@@", True),
    ("@@@RESULT@@@Maybe@@@", None),
    ("Verdict: True", None),
    ("@@RESULT@@True@@", None),
    ("Quoting the format `@@@RESULT@@@True@@@`, my answer is @@@RESULT@@@False@@@.", False),
    ("@@@RESULT@@@True@@@@@@RESULT@@@False@@@@@@RESULT@@@True@@@", True),
    ("Step analysis:\n1. ok\n2. ok\n\n@@@RESULT@@@True@@@\n\nThanks!", True),
    ("@@@RESULT@@@\nFalse\n@@@", False),
    ("@@@RESULT@@@Truely@@@", None),
]
