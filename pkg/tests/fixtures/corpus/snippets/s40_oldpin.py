import tqdm

for _ in tqdm.tqdm(range(3)):
    pass
