"""Freeze reference compound/pos/neu/neg values for sentences.txt.

Runs the published vaderSentiment 3.3.2 package with output rounding
disabled and writes sentiment_reference.tsv.
"""
import vaderSentiment.vaderSentiment as vs

vs.round = lambda x, n=None: x  # keep full precision

analyzer = vs.SentimentIntensityAnalyzer()
with open("sentences.txt", encoding="utf-8") as src, \
        open("sentiment_reference.tsv", "w", encoding="utf-8") as out:
    out.write("text\tcompound\tpos\tneu\tneg\n")
    for line in src.read().split("\n"):
        if not line:
            continue
        s = analyzer.polarity_scores(line)
        out.write("%s\t%r\t%r\t%r\t%r\n" % (line, s["compound"], s["pos"], s["neu"], s["neg"]))
