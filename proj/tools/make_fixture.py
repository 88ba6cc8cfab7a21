#!/usr/bin/env python3
"""Writes the small offline fixture under data/fixture (deterministic)."""
import pathlib
import random
import sys

STORIES = {
    "budget": [
        ("Senate passes stopgap budget bill to avert shutdown", "The Senate approved a stopgap budget bill late Friday. The measure funds federal agencies for six weeks."),
        ("House leaders split over budget bill spending caps", "House leaders disagreed on spending caps in the budget bill. Negotiations continue into the weekend."),
        ("Shutdown deadline looms as budget talks stall", "Budget talks stalled on Tuesday with a shutdown deadline days away. Agencies prepared contingency plans."),
        ("Governors warn budget cuts will hit state programs", "Several governors warned that federal budget cuts would hit state programs. They urged Congress to act."),
        ("Budget deal reached hours before shutdown deadline", "Congressional negotiators reached a budget deal hours before the shutdown deadline. The vote is expected tonight."),
    ],
    "election": [
        ("Early voting turnout breaks records in swing states", "Early voting turnout broke records in several swing states. Election officials reported long lines."),
        ("Candidates clash over economy in final election debate", "The candidates clashed over the economy in the final election debate. Polls show a tight race."),
        ("Election officials expand mail ballot drop boxes", "Election officials expanded mail ballot drop boxes across the state. Voters can return ballots until Tuesday."),
        ("Swing state polls tighten ahead of election day", "Polls in swing states tightened ahead of election day. Both campaigns increased advertising."),
        ("Voters head to polls in closely watched election", "Voters headed to the polls in a closely watched election. Results are expected overnight."),
    ],
    "climate": [
        ("Lawmakers unveil climate bill targeting emissions", "Lawmakers unveiled a climate bill targeting power plant emissions. The plan sets new clean energy goals."),
        ("Climate bill faces opposition from coal state senators", "Senators from coal states opposed the climate bill. They cited job losses in mining towns."),
        ("White House backs clean energy tax credits in climate plan", "The White House backed clean energy tax credits in its climate plan. Officials called emissions cuts urgent."),
        ("Climate activists rally outside Capitol for emissions limits", "Climate activists rallied outside the Capitol for emissions limits. Organizers demanded a vote this month."),
        ("Senate committee advances climate bill on party line vote", "A Senate committee advanced the climate bill on a party line vote. The full Senate may take it up soon."),
    ],
    "court": [
        ("Supreme Court hears arguments on voting rights case", "The Supreme Court heard arguments on a major voting rights case. Justices questioned both sides sharply."),
        ("Senate confirms new Supreme Court justice after hearings", "The Senate confirmed a new Supreme Court justice after weeks of hearings. The vote was narrow."),
        ("Supreme Court ruling reshapes voting rights enforcement", "A Supreme Court ruling reshaped voting rights enforcement. States may change district maps."),
        ("Judiciary committee schedules Supreme Court nominee hearings", "The judiciary committee scheduled hearings for the Supreme Court nominee. Senators requested documents."),
        ("Legal experts weigh impact of Supreme Court decision", "Legal experts weighed the impact of the Supreme Court decision. Civil rights groups vowed to respond."),
    ],
    "immigration": [
        ("Border officials report surge in asylum requests", "Border officials reported a surge in asylum requests this month. Shelters near the border are full."),
        ("Congress debates immigration reform and border funding", "Congress debated immigration reform and border funding. Talks focused on asylum rules."),
        ("Governors request federal help with border arrivals", "Governors requested federal help with border arrivals. Cities struggled to house new migrants."),
        ("Immigration bill stalls over asylum policy dispute", "The immigration bill stalled over an asylum policy dispute. Negotiators plan to meet again."),
        ("New asylum rule takes effect at southern border", "A new asylum rule took effect at the southern border. Advocates filed a legal challenge."),
    ],
    "health": [
        ("Senate votes on drug pricing health care bill", "The Senate voted on a health care bill to lower drug pricing. Insulin costs would be capped."),
        ("Insurers warn health care bill could raise premiums", "Insurers warned the health care bill could raise premiums. Patient groups disputed the claim."),
        ("Medicare drug pricing negotiations begin for ten medicines", "Medicare drug pricing negotiations began for ten medicines. Manufacturers sued to block the plan."),
        ("Health care costs top voter concerns in new survey", "Health care costs topped voter concerns in a new survey. Drug pricing ranked high."),
        ("Lawmakers push insulin price cap in health care package", "Lawmakers pushed an insulin price cap in the health care package. The House may vote next week."),
    ],
    "trade": [
        ("Trade talks resume as tariffs on steel remain", "Trade talks resumed while tariffs on steel remained in place. Farmers hope for relief."),
        ("Farmers urge end to tariffs in trade dispute", "Farmers urged an end to tariffs in the trade dispute. Soybean exports fell sharply."),
        ("Commerce secretary defends steel tariffs before Congress", "The commerce secretary defended steel tariffs before Congress. Senators raised concerns about prices."),
        ("Trade deal framework announced after tariff talks", "A trade deal framework was announced after tariff talks. Details remain unclear."),
        ("Manufacturers split on tariffs as trade talks drag on", "Manufacturers were split on tariffs as trade talks dragged on. Some reported higher costs."),
    ],
    "infrastructure": [
        ("Infrastructure bill promises funding for roads and bridges", "The infrastructure bill promises funding for roads and bridges. Transit agencies welcomed it."),
        ("Mayors lobby Congress for infrastructure broadband funds", "Mayors lobbied Congress for infrastructure broadband funds. Rural areas lack fast internet."),
        ("Infrastructure package clears House after long debate", "The infrastructure package cleared the House after a long debate. It now heads to the president."),
        ("States begin spending infrastructure money on bridge repairs", "States began spending infrastructure money on bridge repairs. Construction starts this spring."),
        ("Transit agencies await infrastructure grants for rail projects", "Transit agencies awaited infrastructure grants for rail projects. Officials expect awards soon."),
    ],
}

SPORTS = [
    ("Home team wins championship in overtime thriller", "The home team won the championship in overtime. Fans celebrated downtown."),
    ("Star quarterback signs record contract extension", "The star quarterback signed a record contract extension. The deal runs five years."),
    ("Underdog club advances to cup semifinal", "The underdog club advanced to the cup semifinal. The coach praised the defense."),
    ("Marathon draws thousands of runners despite rain", "The marathon drew thousands of runners despite rain. A local runner won."),
]


def main(out_dir: pathlib.Path) -> None:
    rng = random.Random(7)
    out_dir.mkdir(parents=True, exist_ok=True)
    news = []
    story_ids = {}
    n = 1
    for story, items in STORIES.items():
        story_ids[story] = []
        for title, abstract in items:
            nid = f"N{n:03d}"
            n += 1
            news.append((nid, "politics", title, abstract))
            story_ids[story].append(nid)
    sports_ids = []
    for title, abstract in SPORTS:
        nid = f"N{n:03d}"
        n += 1
        news.append((nid, "sports", title, abstract))
        sports_ids.append(nid)
    with open(out_dir / "news.tsv", "w") as f:
        for row in news:
            f.write("\t".join(row) + "\n")

    politics = [r[0] for r in news if r[1] == "politics"]
    stories = list(STORIES)
    rows = []
    for i in range(14):
        liked = rng.sample(stories, 2)
        pool = story_ids[liked[0]] + story_ids[liked[1]]
        hist_len = 3 if i == 12 else rng.randint(5, 8)
        history = rng.sample(pool, min(hist_len, len(pool)))
        rest = [x for x in politics if x not in history]
        pos = rng.choice([x for x in pool if x not in history])
        negs = rng.sample([x for x in rest if x not in pool], 5)
        cands = [(pos, 1)] + [(x, 0) for x in negs]
        if i == 13:
            cands.append((sports_ids[0], 0))
        rng.shuffle(cands)
        cand_str = " ".join(f"{c}-{lab}" for c, lab in cands)
        rows.append((f"I{i + 1:03d}", f"U{i % 10 + 1:02d}", f"11/{i + 1}/2019 9:00:00 AM", " ".join(history), cand_str))
    with open(out_dir / "behaviors.tsv", "w") as f:
        for row in rows:
            f.write("\t".join(row) + "\n")

    with open(out_dir / "relation_pairs.tsv", "w") as f:
        for story in stories:
            ids = story_ids[story]
            for a, b in [(0, 1), (0, 4), (2, 3), (1, 2)][: 4 if story != stories[-1] else 2]:
                f.write(f"{ids[a]}\t{ids[b]}\n")


if __name__ == "__main__":
    main(pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/fixture"))
