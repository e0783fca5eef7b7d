from src.harness.cli import rio

if __name__ == "__main__":
    rio()
