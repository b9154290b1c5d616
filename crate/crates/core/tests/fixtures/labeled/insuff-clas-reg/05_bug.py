from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

def ghz():
    qc = QuantumCircuit(3, 1)  # expect: insuff-clas-reg
    qc.h(0)
    qc.cx(0, 1)
    qc.cx(0, 2)
    qc.measure(2, 0)
    job = run(qc)
