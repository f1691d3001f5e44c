"""English verb morphology: form detection, inflection, and form matching.

Replacement verbs must surface in the same form as the verb they replace
(tense/aspect/number), so this module provides a small rule-plus-table
engine: regular orthographic rules, an irregular-verb table, and a common
verb lexicon used to disambiguate lemmatization. It is intentionally
dictionary-light; unknown verbs fall back to the regular rules.
"""
from __future__ import annotations

import logging
import re

logger = logging.getLogger(__name__)

# Form tags.
BASE = "base"
THIRD_SG = "3sg"
PAST = "past"
PAST_PART = "past_part"
GERUND = "gerund"

_VOWELS = "aeiou"

# lemma -> {form: surface}. Gerund/3sg included only when irregular.
_IRREGULAR: dict[str, dict[str, str]] = {
    "be": {PAST: "was", PAST_PART: "been", GERUND: "being", THIRD_SG: "is"},
    "have": {PAST: "had", PAST_PART: "had", THIRD_SG: "has"},
    "do": {PAST: "did", PAST_PART: "done", THIRD_SG: "does"},
    "go": {PAST: "went", PAST_PART: "gone", THIRD_SG: "goes"},
    "say": {PAST: "said", PAST_PART: "said"},
    "get": {PAST: "got", PAST_PART: "gotten"},
    "make": {PAST: "made", PAST_PART: "made"},
    "know": {PAST: "knew", PAST_PART: "known"},
    "think": {PAST: "thought", PAST_PART: "thought"},
    "take": {PAST: "took", PAST_PART: "taken"},
    "see": {PAST: "saw", PAST_PART: "seen"},
    "come": {PAST: "came", PAST_PART: "come"},
    "give": {PAST: "gave", PAST_PART: "given"},
    "find": {PAST: "found", PAST_PART: "found"},
    "tell": {PAST: "told", PAST_PART: "told"},
    "become": {PAST: "became", PAST_PART: "become"},
    "leave": {PAST: "left", PAST_PART: "left"},
    "feel": {PAST: "felt", PAST_PART: "felt"},
    "put": {PAST: "put", PAST_PART: "put"},
    "bring": {PAST: "brought", PAST_PART: "brought"},
    "begin": {PAST: "began", PAST_PART: "begun"},
    "keep": {PAST: "kept", PAST_PART: "kept"},
    "hold": {PAST: "held", PAST_PART: "held"},
    "write": {PAST: "wrote", PAST_PART: "written"},
    "stand": {PAST: "stood", PAST_PART: "stood"},
    "hear": {PAST: "heard", PAST_PART: "heard"},
    "let": {PAST: "let", PAST_PART: "let"},
    "mean": {PAST: "meant", PAST_PART: "meant"},
    "set": {PAST: "set", PAST_PART: "set"},
    "meet": {PAST: "met", PAST_PART: "met"},
    "run": {PAST: "ran", PAST_PART: "run"},
    "pay": {PAST: "paid", PAST_PART: "paid"},
    "sit": {PAST: "sat", PAST_PART: "sat"},
    "speak": {PAST: "spoke", PAST_PART: "spoken"},
    "lead": {PAST: "led", PAST_PART: "led"},
    "read": {PAST: "read", PAST_PART: "read"},
    "grow": {PAST: "grew", PAST_PART: "grown"},
    "lose": {PAST: "lost", PAST_PART: "lost"},
    "fall": {PAST: "fell", PAST_PART: "fallen"},
    "send": {PAST: "sent", PAST_PART: "sent"},
    "build": {PAST: "built", PAST_PART: "built"},
    "understand": {PAST: "understood", PAST_PART: "understood"},
    "draw": {PAST: "drew", PAST_PART: "drawn"},
    "break": {PAST: "broke", PAST_PART: "broken"},
    "spend": {PAST: "spent", PAST_PART: "spent"},
    "cut": {PAST: "cut", PAST_PART: "cut"},
    "rise": {PAST: "rose", PAST_PART: "risen"},
    "drive": {PAST: "drove", PAST_PART: "driven"},
    "buy": {PAST: "bought", PAST_PART: "bought"},
    "wear": {PAST: "wore", PAST_PART: "worn"},
    "choose": {PAST: "chose", PAST_PART: "chosen"},
    "sell": {PAST: "sold", PAST_PART: "sold"},
    "teach": {PAST: "taught", PAST_PART: "taught"},
    "catch": {PAST: "caught", PAST_PART: "caught"},
    "fight": {PAST: "fought", PAST_PART: "fought"},
    "fly": {PAST: "flew", PAST_PART: "flown"},
    "forget": {PAST: "forgot", PAST_PART: "forgotten"},
    "hide": {PAST: "hid", PAST_PART: "hidden"},
    "hit": {PAST: "hit", PAST_PART: "hit"},
    "ride": {PAST: "rode", PAST_PART: "ridden"},
    "ring": {PAST: "rang", PAST_PART: "rung"},
    "shut": {PAST: "shut", PAST_PART: "shut"},
    "sing": {PAST: "sang", PAST_PART: "sung"},
    "sleep": {PAST: "slept", PAST_PART: "slept"},
    "steal": {PAST: "stole", PAST_PART: "stolen"},
    "swim": {PAST: "swam", PAST_PART: "swum"},
    "throw": {PAST: "threw", PAST_PART: "thrown"},
    "wake": {PAST: "woke", PAST_PART: "woken"},
    "win": {PAST: "won", PAST_PART: "won"},
    "eat": {PAST: "ate", PAST_PART: "eaten"},
    "drink": {PAST: "drank", PAST_PART: "drunk"},
}

# Multi-syllable lemmas that still double their final consonant.
_DOUBLING = frozenset(
    """admit begin commit confer control forget occur permit prefer refer
    regret submit transfer transmit""".split()
)

# Common regular verbs; used to disambiguate lemmatization candidates.
_COMMON_LEMMAS = frozenset(
    """agree answer arrive ask attend book borrow call cancel carry change
    charge check clean close collect complete confirm cook copy dance decide
    deliver discuss download drop email enjoy explain finish fix follow
    forward happen hate help hope hurry invite join learn like listen live
    look love manage mention miss move need offer open order organize pack
    paint pass phone pick plan play post prepare print promise pull push
    reach receive remember remind rent repair repeat reply report request
    return review save schedule search serve share shop show sign smile
    solve sort spell start stay stop study suggest support switch talk text
    thank train translate travel try update upload use visit vote wait walk
    want wash watch wish wonder work worry""".split()
)

KNOWN_LEMMAS = frozenset(_COMMON_LEMMAS | set(_IRREGULAR) | _DOUBLING)

# surface -> (lemma, form), built once from the irregular table.
_IRREGULAR_SURFACE: dict[str, tuple[str, str]] = {}
for _lemma, _forms in _IRREGULAR.items():
    for _form in (PAST, PAST_PART, GERUND, THIRD_SG):
        _surface = _forms.get(_form)
        if _surface and _surface != _lemma and _surface not in _IRREGULAR_SURFACE:
            _IRREGULAR_SURFACE[_surface] = (_lemma, _form)
_IRREGULAR_SURFACE.update({"are": ("be", BASE), "am": ("be", BASE), "were": ("be", PAST)})


def _syllable_groups(word: str) -> int:
    return len(re.findall(r"[aeiouy]+", word))


def _doubles_final(word: str) -> bool:
    if len(word) < 3:
        return False
    if word[-1] in _VOWELS + "wxy" or word[-2] not in _VOWELS or word[-3] in _VOWELS:
        return False
    return _syllable_groups(word) == 1 or word in _DOUBLING


def inflect(lemma: str, form: str) -> str:
    """Inflect a base-form verb into the requested form using table + rules."""
    lemma = lemma.lower()
    irregular = _IRREGULAR.get(lemma, {})
    if form == BASE:
        return lemma
    if form in irregular:
        return irregular[form]
    if form == THIRD_SG:
        if re.search(r"(s|x|z|ch|sh|o)$", lemma):
            return lemma + "es"
        if lemma.endswith("y") and lemma[-2:-1] not in _VOWELS:
            return lemma[:-1] + "ies"
        return lemma + "s"
    if form == GERUND:
        if lemma.endswith("ie"):
            return lemma[:-2] + "ying"
        if lemma.endswith("e") and not lemma.endswith("ee"):
            return lemma[:-1] + "ing"
        if _doubles_final(lemma):
            return lemma + lemma[-1] + "ing"
        return lemma + "ing"
    if form in (PAST, PAST_PART):
        if lemma.endswith("e"):
            return lemma + "d"
        if lemma.endswith("y") and lemma[-2:-1] not in _VOWELS:
            return lemma[:-1] + "ied"
        if _doubles_final(lemma):
            return lemma + lemma[-1] + "ed"
        return lemma + "ed"
    raise ValueError(f"unknown verb form tag: {form!r}")


def verb_form(verb: str) -> str:
    """Classify the morphological form of a verb surface string."""
    word = verb.lower()
    if word in _IRREGULAR_SURFACE:
        return _IRREGULAR_SURFACE[word][1]
    if word in KNOWN_LEMMAS:
        return BASE
    if word.endswith("ing") and len(word) > 4:
        return GERUND
    if word.endswith("ed") and len(word) > 3:
        return PAST
    if word.endswith("s") and not word.endswith("ss") and len(word) > 2:
        return THIRD_SG
    return BASE


def lemmatize_verb(verb: str) -> str:
    """Best-effort base form of a verb surface string.

    Candidates from suffix stripping are accepted when re-inflecting them
    reproduces the original surface, preferring lexicon entries.
    """
    word = verb.lower()
    if word in _IRREGULAR_SURFACE:
        return _IRREGULAR_SURFACE[word][0]
    if word in KNOWN_LEMMAS:
        return word
    form = verb_form(word)
    if form == BASE:
        return word

    candidates: list[str] = []
    if form == GERUND:
        stem = word[:-3]
        candidates = [stem, stem + "e"]
        if len(stem) >= 2 and stem[-1] == stem[-2]:
            candidates.append(stem[:-1])
        if word.endswith("ying"):
            candidates.append(word[:-4] + "ie")
    elif form == PAST:
        candidates = [word[:-2], word[:-1]]
        if word.endswith("ied"):
            candidates.append(word[:-3] + "y")
        if len(word) >= 4 and word[-3] == word[-4]:
            candidates.append(word[:-3])
    elif form == THIRD_SG:
        candidates = [word[:-1]]
        if word.endswith("es"):
            candidates.append(word[:-2])
        if word.endswith("ies"):
            candidates.append(word[:-3] + "y")

    round_trips = [c for c in candidates if c and inflect(c, form) == word]
    for candidate in round_trips:
        if candidate in KNOWN_LEMMAS:
            return candidate
    if round_trips:
        return round_trips[0]
    return candidates[0] if candidates and candidates[0] else word


def match_verb_form(source_verb: str, target_lemma: str) -> str:
    """Inflect ``target_lemma`` to the morphological form of ``source_verb``.

    Pairs that cannot be inflected fall back to the lemma unchanged (logged).
    Capitalization of the source is carried over.
    """
    lemma = target_lemma.strip()
    if not lemma or not lemma.replace("-", "").isalpha():
        logger.warning("cannot inflect %r to match %r; leaving unchanged", target_lemma, source_verb)
        return target_lemma
    result = inflect(lemma.lower(), verb_form(source_verb))
    if source_verb[:1].isupper():
        result = result[:1].upper() + result[1:]
    return result
