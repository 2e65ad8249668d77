#!/usr/bin/env python3
"""Generates the pinned tokenizer and BLEU fixtures under tests/fixtures/.

The tokenizer side trains a small byte-level BPE vocabulary (GPT-2 file
formats: vocab.json + merges.txt) on an embedded French/English sample and
pins the encodings of ~520 strings produced by a reference implementation of
the GPT-2 byte-level BPE algorithm. The BLEU side pins a 10-pair corpus score
computed by an independent implementation of mteval-13a tokenization and
corpus BLEU.

Run from the repository root:  python3 tests/oracle/gen_fixtures.py
"""

import collections
import json
import math
import pathlib
import random

import regex as re

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

# ---------------------------------------------------------------------------
# reference GPT-2 byte-level BPE

PAT = re.compile(
    r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"""
)


def bytes_to_unicode():
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


BYTE_ENCODER = bytes_to_unicode()


def get_pairs(word):
    return {(word[i], word[i + 1]) for i in range(len(word) - 1)}


def bpe(token, ranks, cache):
    if token in cache:
        return cache[token]
    word = tuple(token)
    pairs = get_pairs(word)
    while pairs:
        bigram = min(pairs, key=lambda p: ranks.get(p, float("inf")))
        if bigram not in ranks:
            break
        first, second = bigram
        new_word = []
        i = 0
        while i < len(word):
            try:
                j = word.index(first, i)
            except ValueError:
                new_word.extend(word[i:])
                break
            new_word.extend(word[i:j])
            i = j
            if i < len(word) - 1 and word[i] == first and word[i + 1] == second:
                new_word.append(first + second)
                i += 2
            else:
                new_word.append(word[i])
                i += 1
        word = tuple(new_word)
        pairs = get_pairs(word)
    cache[token] = word
    return word


def encode(text, vocab, ranks, cache):
    ids = []
    for pre in PAT.findall(text):
        proxied = "".join(BYTE_ENCODER[b] for b in pre.encode("utf-8"))
        ids.extend(vocab[sym] for sym in bpe(proxied, ranks, cache))
    return ids


# ---------------------------------------------------------------------------
# BPE training corpus (original sample text, French-heavy)

SAMPLE_TEXT = """
La bibliothèque municipale ouvre ses portes chaque matin à neuf heures.
Les élèves préparent leurs exposés sur l'histoire des sciences naturelles.
Le château médiéval domine la vallée depuis plus de huit siècles.
Nous avons dégusté un excellent café près de la gare centrale.
Elle étudie la philosophie à l'université de Strasbourg depuis trois ans.
Les vendanges commencent généralement à la fin du mois de septembre.
Il faut réserver les billets de train plusieurs semaines à l'avance.
Le boulanger du quartier prépare des croissants exceptionnels.
Cette région montagneuse attire de nombreux randonneurs chaque été.
Les chercheurs publient leurs résultats dans des revues spécialisées.
Mon grand-père racontait souvent des histoires de son village natal.
La météo annonce des orages violents pour la fin de semaine.
Nous habitons un petit appartement au cinquième étage sans ascenseur.
Le musée présente une exposition consacrée aux peintres impressionnistes.
Les enfants jouent dans le parc malgré la pluie fine d'automne.
Ce restaurant propose une cuisine traditionnelle à prix raisonnable.
L'équipe municipale a voté le budget pour la rénovation des écoles.
Elle apprend le piano depuis l'âge de six ans avec passion.
Les pêcheurs rentrent au port avant le lever du soleil.
La traduction de ce roman a demandé presque deux années de travail.
The morning train arrives at the central station around seven o'clock.
Researchers published their findings in several scientific journals.
The old library contains thousands of rare books and manuscripts.
Children were playing football in the park despite the cold weather.
She doesn't want to miss the opening of the photography exhibition.
We couldn't find a better restaurant anywhere near the harbour.
It's important to reserve tickets well in advance during summer.
The committee will discuss the proposal next Thursday afternoon.
Numbers like 1914, 2049 and 12345 appear in historical documents.
Quel est le prix d'un billet aller-retour pour Marseille ?
Où se trouve la station de métro la plus proche, s'il vous plaît ?
C'est une journée magnifique pour se promener le long de la Seine.
¡Qué sorpresa! Die Straße war völlig leer am frühen Morgen.
"""


def train_bpe(text, num_merges):
    words = collections.Counter()
    for pre in PAT.findall(text):
        proxied = tuple(BYTE_ENCODER[b] for b in pre.encode("utf-8"))
        words[proxied] += 1

    merges = []
    for _ in range(num_merges):
        pair_counts = collections.Counter()
        for word, freq in words.items():
            for i in range(len(word) - 1):
                pair_counts[(word[i], word[i + 1])] += freq
        if not pair_counts:
            break
        best_count = max(pair_counts.values())
        if best_count < 2:
            break
        best = min(p for p, c in pair_counts.items() if c == best_count)
        merges.append(best)
        merged = collections.Counter()
        first, second = best
        for word, freq in words.items():
            out = []
            i = 0
            while i < len(word):
                if i < len(word) - 1 and word[i] == first and word[i + 1] == second:
                    out.append(first + second)
                    i += 2
                else:
                    out.append(word[i])
                    i += 1
            merged[tuple(out)] += freq
        words = merged
    return merges


def build_vocab(merges):
    vocab = {}
    for b in range(256):
        vocab[BYTE_ENCODER[b]] = len(vocab)
    for first, second in merges:
        vocab[first + second] = len(vocab)
    vocab["<|endoftext|>"] = len(vocab)
    return vocab


# ---------------------------------------------------------------------------
# fixture strings

FRENCH_SENTENCES = [s for s in SAMPLE_TEXT.strip().split("\n") if s]

EDGE_CASES = [
    "",
    " ",
    "   ",
    "\t\n",
    "a",
    " a",
    "a ",
    "  leading and trailing  ",
    "Hello world",
    "Bonjour, comment ça va ?",
    "été — l'œuvre",
    "ﬁnance",  # NFKC ligature left unnormalized on purpose
    "été",  # combining acute
    "l'homme d'affaires n'a qu'une idée",
    "isn't it, we're, they've, I'll, he'd, I'm, it's",
    "ISN'T IT",
    "café crème",  # no-break space
    "ligne1\nligne2\r\nligne3",
    "tab\tseparated\tvalues",
    "1914-1918 et 2049 tokens",
    "3,14159 puis 1.618",
    "100% de réussite !!!",
    "« guillemets » et “quotes”",
    "emoji 😀 puis 🇫🇷 drapeau 🎉🎉",
    "🤖😈 mélange 🌍 d'emoji et de texte",
    "中文字符 et du français",
    "Ελληνικά και Γαλλικά",
    "русский текст здесь",
    "math: ∑ ∫ ≠ ≤ π × ÷",
    "mojibake: Ã© Ã¨ Ã§ â€™",
    "price: $100, €250, £37.50",
    "a''s ''t x'' '' 'unquoted'",
    "...ellipsis...and..more..",
    "dash-separated long-words anti-pattern",
    "under_score __double__ snake_case",
    "1ᵉʳ étage, 2ᵈᵉ porte",
    "Œuvre de l'Âme sœur NAÏVE",
    "multiple     internal      spaces",
    "trailing spaces   \nnew line",
    " line sep para sep",
    "zero​width​space",
]


def random_strings(rng, count):
    pools = [
        list("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"),
        list("àâäçéèêëîïôöùûüÿœæÀÂÄÇÉÈÊËÎÏÔÖÙÛÜŸŒÆ"),
        list("0123456789"),
        list(" .,;:!?'\"()[]{}-–—…«»"),
        list("😀😂🤔🎉🌍🚀❤️⭐"),
        list("中文漢字日本語한글"),
        [" ", "  ", "\t", "\n"],
        ["'s", "'t", "'re", "'ve", "'m", "'ll", "'d"],
    ]
    weights = [10, 6, 3, 4, 1, 1, 4, 1]
    out = []
    for _ in range(count):
        n = rng.randint(1, 60)
        parts = []
        for _ in range(n):
            pool = rng.choices(pools, weights=weights)[0]
            parts.append(rng.choice(pool))
        out.append("".join(parts))
    return out


# ---------------------------------------------------------------------------
# independent 13a BLEU oracle

def tokenize_13a(line):
    line = line.replace("<skipped>", "").replace("-\n", "").replace("\n", " ")
    if "&" in line:
        line = (
            line.replace("&quot;", '"')
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">")
        )
    line = f" {line} "
    line = re.sub(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])", r" \1 ", line)
    line = re.sub(r"([^0-9])([\.,])", r"\1 \2 ", line)
    line = re.sub(r"([\.,])([^0-9])", r" \1 \2", line)
    line = re.sub(r"([0-9])(-)", r"\1 - ", line)
    return line.split()


def corpus_bleu(candidates, references):
    matches = [0] * 4
    totals = [0] * 4
    cand_len = ref_len = 0
    for cand, ref in zip(candidates, references):
        c = tokenize_13a(cand)
        r = tokenize_13a(ref)
        cand_len += len(c)
        ref_len += len(r)
        for n in range(1, 5):
            cc = collections.Counter(tuple(c[i : i + n]) for i in range(len(c) - n + 1))
            rc = collections.Counter(tuple(r[i : i + n]) for i in range(len(r) - n + 1))
            matches[n - 1] += sum(min(v, rc[g]) for g, v in cc.items())
            totals[n - 1] += max(0, len(c) - n + 1)
    bp = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    precisions = [m / t if t else 0.0 for m, t in zip(matches, totals)]
    if any(p == 0.0 for p in precisions):
        return 0.0, precisions, bp, cand_len, ref_len
    score = bp * math.exp(sum(math.log(p) for p in precisions) / 4.0) * 100.0
    return score, precisions, bp, cand_len, ref_len


BLEU_PAIRS = [
    ("Le chat dort sur le canapé du salon.", "Le chat dort sur le canapé dans le salon."),
    ("Les résultats sont publiés chaque année en juin.",
     "Les résultats sont publiés tous les ans au mois de juin."),
    ("The train arrives at seven o'clock.", "The train arrives at 7 o'clock sharp."),
    ("Nous avons visité le musée hier après-midi.",
     "Nous avons visité le musée hier dans l'après-midi."),
    ("Elle a acheté 3 livres pour 25,50 euros.",
     "Elle a acheté trois livres pour 25,50 euros."),
    ("Il pleut beaucoup dans cette région en automne.",
     "Il pleut souvent dans cette région pendant l'automne."),
    ("The committee approved the new budget.",
     "The committee has approved the new annual budget."),
    ("Je ne comprends pas cette question difficile.",
     "Je ne comprends pas du tout cette question difficile."),
    ("Les enfants jouent dans le parc.", "Les enfants jouent dans le grand parc."),
    ("La réunion commence à neuf heures précises.",
     "La réunion commencera à neuf heures précises."),
]


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)

    merges = train_bpe(SAMPLE_TEXT, 700)
    vocab = build_vocab(merges)
    ranks = {pair: i for i, pair in enumerate(merges)}
    cache = {}

    with open(FIXTURES / "fixture_vocab.json", "w", encoding="utf-8") as f:
        json.dump(vocab, f, ensure_ascii=False)
    with open(FIXTURES / "fixture_merges.txt", "w", encoding="utf-8") as f:
        f.write("#version: 0.2\n")
        for a, b in merges:
            f.write(f"{a} {b}\n")

    rng = random.Random(20260826)
    strings = list(FRENCH_SENTENCES) + EDGE_CASES
    strings += random_strings(rng, 520 - len(strings))
    with open(FIXTURES / "tokenizer_fixture.jsonl", "w", encoding="utf-8") as f:
        for s in strings:
            ids = encode(s, vocab, ranks, cache)
            f.write(json.dumps({"text": s, "ids": ids}, ensure_ascii=False) + "\n")
    print(f"tokenizer fixture: {len(strings)} strings, vocab size {len(vocab)}")

    cands = [c for c, _ in BLEU_PAIRS]
    refs = [r for _, r in BLEU_PAIRS]
    score, precisions, bp, cand_len, ref_len = corpus_bleu(cands, refs)
    with open(FIXTURES / "bleu_fixture.json", "w", encoding="utf-8") as f:
        json.dump(
            {
                "pairs": [{"candidate": c, "reference": r} for c, r in BLEU_PAIRS],
                "bleu": score,
                "precisions": precisions,
                "brevity_penalty": bp,
                "candidate_len": cand_len,
                "reference_len": ref_len,
            },
            f,
            ensure_ascii=False,
            indent=2,
        )
    print(f"bleu fixture: score {score:.4f}, bp {bp:.4f}")


if __name__ == "__main__":
    main()
