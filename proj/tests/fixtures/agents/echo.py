# Minimal process agent: answers every request with its query as a comment and `1+1`.
# With --hang it never answers; with --garbage it answers with a non-JSON line.
import json
import sys
import time

request = json.loads(sys.stdin.readline())
if "--hang" in sys.argv:
    time.sleep(60)
if "--garbage" in sys.argv:
    print("not json", flush=True)
    sys.exit(0)
comment = "\n".join("# " + line for line in request["query"].splitlines())
print(json.dumps({"code": comment + "\n1+1", "raw_message": "echo"}), flush=True)
