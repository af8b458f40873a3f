"""Event vocabulary for ICU careflow logs.

49 event names: 3 admission types, 10 careunit in/out events (5 units),
34 lab measurement events (17 items, normal + abnormal), and 2 exit events.
"ADM EMERGENCY" appears with a space in some source material; we canonicalize
to ADM_EMERGENCY so every event name is a single token.
"""

ADMISSION_EVENTS = ("ADM_EMERGENCY", "ADM_ELECTIVE", "ADM_URGENT")

CARE_UNITS = ("CCU", "CSRU", "MICU", "SICU", "TSICU")

CAREUNIT_EVENTS = tuple(
    f"ICU_{direction}_{unit}" for unit in CARE_UNITS for direction in ("in", "out")
)

LAB_ITEMS = (
    "albumin",
    "aniongap",
    "bicarbonate",
    "bilirubin",
    "bun",
    "creatinine",
    "glucose",
    "hematocrit",
    "hemoglobin",
    "inr",
    "lactate",
    "platelet",
    "potassium",
    "pt",
    "ptt",
    "sodium",
    "wbc",
)

LAB_NORMAL_EVENTS = tuple(LAB_ITEMS)
LAB_ABNORMAL_EVENTS = tuple(f"{item}_abn" for item in LAB_ITEMS)
LAB_EVENTS = LAB_NORMAL_EVENTS + LAB_ABNORMAL_EVENTS

EXIT_EVENTS = ("DEATH", "DISCH")

VOCABULARY = ADMISSION_EVENTS + CAREUNIT_EVENTS + LAB_EVENTS + EXIT_EVENTS

INSURANCE_TYPES = ("Medicaid", "Medicare", "Private", "SelfPay", "Government")


def event_category(name):
    """Return one of 'admission', 'careunit', 'lab', 'exit', or None."""
    if name in ADMISSION_EVENTS:
        return "admission"
    if name in CAREUNIT_EVENTS:
        return "careunit"
    if name in LAB_EVENTS:
        return "lab"
    if name in EXIT_EVENTS:
        return "exit"
    return None
