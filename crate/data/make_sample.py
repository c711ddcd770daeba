"""Regenerate sample_motes.txt: three motes, ~31 s cadence, 2.6 days."""
import datetime as dt
import math
import random

rng = random.Random(2004)
start = dt.datetime(2004, 2, 28, 0, 0, 0)
span = int(2.6 * 86400)
rows = []
for mote, bias in ((1, 0.0), (2, 0.15), (3, -0.1)):
    t = rng.uniform(0, 31)
    epoch = 0
    while t < span:
        phase = 2 * math.pi * t / 86400
        temp = 19.0 + bias + 3.0 * math.sin(phase - 2.0) + rng.gauss(0, 0.08)
        hum = 38.0 - 4.0 * math.sin(phase - 2.0) + rng.gauss(0, 0.2)
        light = max(0.0, 300.0 * math.sin(phase - 1.6)) + rng.gauss(0, 2)
        volt = 2.70 - 0.03 * t / span + rng.gauss(0, 0.002)
        if rng.random() > 0.01:  # occasional dropped packet
            rows.append((t, epoch, mote, temp, hum, light, volt))
        epoch += 1
        t += 31 + rng.uniform(-3, 3)
rows.sort()
with open("sample_motes.txt", "w") as f:
    for i, (t, epoch, mote, temp, hum, light, volt) in enumerate(rows):
        stamp = start + dt.timedelta(seconds=t)
        f.write(f"{stamp:%Y-%m-%d %H:%M:%S.%f} {epoch} {mote} {temp:.4f} {hum:.4f} {light:.2f} {volt:.5f}\n")
        if i % 5000 == 4999:
            f.write(f"{stamp:%Y-%m-%d %H:%M:%S} {epoch}\n")  # truncated row, as in the real log
