from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

def idle(n):
    qc = QuantumCircuit(1)
    for _ in range(n):
        qc.id(0)
    return qc
